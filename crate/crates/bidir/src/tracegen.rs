//! Ground-truth trace generation for supervised pretraining: sample a random
//! program and inputs, then convert the program into a bidirectional action
//! sequence by probabilistically inverting branches from the output down.
//! Every emitted trace is replay-validated against a fresh environment.

use crate::dsl::{arith, doubleadd, Domain};
use crate::env::{Action, EnvConfig, StepOutcome, SynthEnv};
use crate::graph::ActionError;
use crate::ops::{apply_forward, Direction, Registry};
use crate::program::Program;
use crate::values::{Example, ExampleTuple, Task, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Attempts per record before giving up (random generation is rejecting).
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub domain: Domain,
    pub task: Task,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceGenConfig {
    pub domain: Domain,
    /// Size budget for generated programs (chain length for double-and-add).
    pub depth: usize,
    /// Per-branch probability of expanding backward instead of forward.
    pub p_invert: f64,
    pub seed: u64,
}

/// Flattened program node with its value tuple over the training examples.
struct PNode {
    func: Option<usize>,
    args: Vec<usize>,
    tuple: ExampleTuple,
}

fn flatten(
    p: &Program,
    task: &Task,
    registry: &Registry,
    nodes: &mut Vec<PNode>,
) -> Option<usize> {
    match p {
        Program::Input(i) => {
            let tuple = task.input_tuple(*i);
            nodes.push(PNode { func: None, args: vec![], tuple });
            Some(nodes.len() - 1)
        }
        Program::Apply { func, args } => {
            let ids: Vec<usize> = args
                .iter()
                .map(|a| flatten(a, task, registry, nodes))
                .collect::<Option<_>>()?;
            let tuples: Vec<&ExampleTuple> = ids.iter().map(|&i| &nodes[i].tuple).collect();
            let tuple = apply_forward(registry.func(*func), &tuples).ok()?;
            nodes.push(PNode { func: Some(*func), args: ids, tuple });
            Some(nodes.len() - 1)
        }
    }
}

enum Planned {
    Forward(usize),
    Inverse(usize),
    /// (pnode, cond-inverse index)
    CondInverse(usize, usize),
}

/// Decide the backward spine by coin flips, then lay out actions: all forward
/// subtree evaluations first (so cond-inverse known arguments are grounded),
/// then the backward steps from the output down.
fn plan(
    tree: &[PNode],
    root: usize,
    p_invert: f64,
    registry: &Registry,
    rng: &mut ChaCha8Rng,
) -> Vec<Planned> {
    let mut fwd_roots = Vec::new();
    let mut back = Vec::new();
    let mut cur = root;
    loop {
        let node = &tree[cur];
        let Some(f) = node.func else { break };
        if !rng.random_bool(p_invert) {
            fwd_roots.push(cur);
            break;
        }
        let fd = registry.func(f);
        if fd.inverse.is_some() {
            back.push(Planned::Inverse(cur));
            cur = node.args[0];
        } else if !fd.cond_inverses.is_empty() {
            let unknown_pos = rng.random_range(0..fd.arity());
            let known_pos: Vec<usize> = (0..fd.arity()).filter(|&p| p != unknown_pos).collect();
            match fd.cond_inverses.iter().position(|c| c.known_positions == known_pos) {
                Some(ci) => {
                    for &p in &known_pos {
                        fwd_roots.push(node.args[p]);
                    }
                    back.push(Planned::CondInverse(cur, ci));
                    cur = node.args[unknown_pos];
                }
                None => {
                    fwd_roots.push(cur);
                    break;
                }
            }
        } else {
            fwd_roots.push(cur);
            break;
        }
    }
    let mut actions = Vec::new();
    for r in fwd_roots {
        post_order(tree, r, &mut actions);
    }
    actions.extend(back);
    actions
}

fn post_order(tree: &[PNode], n: usize, out: &mut Vec<Planned>) {
    if tree[n].func.is_none() {
        return;
    }
    for &c in &tree[n].args {
        post_order(tree, c, out);
    }
    out.push(Planned::Forward(n));
}

/// Convert a ground-truth program into a validated action trace. Returns
/// None when the task is trivial, a lookup fails, or the simulated episode
/// hits a semantic error (callers retry with fresh randomness).
pub fn program_to_trace(
    task: &Task,
    program: &Program,
    domain: Domain,
    p_invert: f64,
    rng: &mut ChaCha8Rng,
) -> Option<TraceRecord> {
    let mut cfg = EnvConfig::new(domain);
    cfg.max_steps = 512;
    let mut env = SynthEnv::new(task.clone(), cfg).ok()?;
    env.reset();
    if env.done() {
        return None;
    }
    let registry = env.registry().clone();
    let mut tree = Vec::new();
    let root = flatten(program, task, &registry, &mut tree)?;
    if tree[root].tuple != task.output_tuple() {
        return None;
    }
    let planned = plan(&tree, root, p_invert, &registry, rng);
    let variants = env.variants().clone();
    let variant_index = |func: usize, dir: Direction| {
        variants.iter().position(|v| v.func == func && v.direction == dir)
    };

    let mut recorded = Vec::new();
    for pa in planned {
        if env.done() {
            break;
        }
        let action = match pa {
            Planned::Forward(n) => {
                let f = tree[n].func.unwrap();
                let variant = variant_index(f, Direction::Forward)?;
                let args: Vec<usize> = tree[n]
                    .args
                    .iter()
                    .map(|&c| env.graph().find_node(&tree[c].tuple))
                    .collect::<Option<_>>()?;
                Action { variant, arg_node_ids: args }
            }
            Planned::Inverse(n) => {
                let f = tree[n].func.unwrap();
                let variant = variant_index(f, Direction::Inverse)?;
                let target = env.graph().find_node(&tree[n].tuple)?;
                Action { variant, arg_node_ids: vec![target] }
            }
            Planned::CondInverse(n, ci) => {
                let f = tree[n].func.unwrap();
                let variant = variant_index(f, Direction::CondInverse(ci))?;
                let target = env.graph().find_node(&tree[n].tuple)?;
                let mut args = vec![target];
                for &p in &registry.func(f).cond_inverses[ci].known_positions {
                    args.push(env.graph().find_node(&tree[tree[n].args[p]].tuple)?);
                }
                Action { variant, arg_node_ids: args }
            }
        };
        let (_, _, _, info) = env.step(&action);
        match info.outcome {
            StepOutcome::Valid | StepOutcome::Solved => recorded.push(action),
            // an identical edge already exists (shared subterm): skip it
            StepOutcome::Invalid(ActionError::DuplicateEdge) => {}
            StepOutcome::Invalid(_) => return None,
        }
    }
    if env.solution().is_none() || recorded.is_empty() {
        return None;
    }
    let record = TraceRecord { domain, task: task.clone(), actions: recorded };
    if !replay_solves(&record) {
        return None;
    }
    Some(record)
}

/// Replay a trace on a fresh environment and require it to solve.
pub fn replay_solves(record: &TraceRecord) -> bool {
    let mut cfg = EnvConfig::new(record.domain);
    cfg.max_steps = record.actions.len().max(1);
    let Ok(mut env) = SynthEnv::new(record.task.clone(), cfg) else { return false };
    env.reset();
    for action in &record.actions {
        if env.done() {
            return false;
        }
        if !env.valid_action_mask().permits(action) {
            return false;
        }
        let (_, _, _, info) = env.step(action);
        if matches!(info.outcome, StepOutcome::Invalid(_)) {
            return false;
        }
    }
    env.solution().is_some()
}

/// Sample a random solvable task with its ground-truth program.
pub fn gen_random_task(
    domain: Domain,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Task, Program)> {
    match domain {
        Domain::Arith24 => gen_arith_task(depth, rng),
        Domain::DoubleAdd => gen_doubleadd_task(depth, rng),
        Domain::GridSym => gen_grid_task(depth, rng),
    }
}

/// Random 24-Game-style task: four digits 1-9 and a target produced by a
/// random program with exactly `depth` applications. Digit reuse is allowed
/// (the relaxed rules the engine plays under).
fn gen_arith_task(depth: usize, rng: &mut ChaCha8Rng) -> Option<(Task, Program)> {
    let registry = Domain::Arith24.registry();
    let fi = |name: &str| registry.func_index(name).unwrap();
    let ops: [(usize, fn(u64, u64) -> Result<Value, crate::values::DomainError>); 4] = [
        (fi("add"), arith::add),
        (fi("sub"), arith::sub),
        (fi("mul"), arith::mul),
        (fi("div"), arith::div),
    ];
    let digits: Vec<u64> = (0..4).map(|_| rng.random_range(1..=9)).collect();

    fn gen(
        budget: usize,
        digits: &[u64],
        ops: &[(usize, fn(u64, u64) -> Result<Value, crate::values::DomainError>)],
        rng: &mut ChaCha8Rng,
    ) -> Option<(Program, u64)> {
        if budget == 0 {
            let i = rng.random_range(0..digits.len());
            return Some((Program::Input(i), digits[i]));
        }
        let left_budget = rng.random_range(0..budget);
        let right_budget = budget - 1 - left_budget;
        let (lp, lv) = gen(left_budget, digits, ops, rng)?;
        let (rp, rv) = gen(right_budget, digits, ops, rng)?;
        let (func, f) = ops[rng.random_range(0..ops.len())];
        match f(lv, rv) {
            Ok(Value::Int(v)) => {
                Some((Program::Apply { func, args: vec![lp, rp] }, v))
            }
            _ => None,
        }
    }

    let (prog, target) = gen(depth.max(1), &digits, &ops, rng)?;
    if digits.contains(&target) {
        return None; // trivial: the output equals an input
    }
    let task = Task {
        id: format!("arith-{}{}{}{}-{target}", digits[0], digits[1], digits[2], digits[3]),
        train: vec![Example {
            inputs: digits.into_iter().map(Value::Int).collect(),
            output: Some(Value::Int(target)),
        }],
        test: vec![],
    };
    Some((task, prog))
}

fn gen_doubleadd_task(depth: usize, rng: &mut ChaCha8Rng) -> Option<(Task, Program)> {
    let registry = Domain::DoubleAdd.registry();
    let add_one = registry.func_index("add_one").unwrap();
    let double = registry.func_index("double").unwrap();
    let len = rng.random_range(1..=depth.max(1));
    let mut v = doubleadd::START_VALUE;
    let mut prog = Program::Input(0);
    for _ in 0..len {
        let func = if rng.random_bool(0.5) && 2 * v <= doubleadd::MAX_VALUE {
            v *= 2;
            double
        } else {
            v += 1;
            add_one
        };
        prog = Program::Apply { func, args: vec![prog] };
    }
    let task = Task {
        id: format!("doubleadd-{v}"),
        train: vec![Example {
            inputs: vec![Value::Int(doubleadd::START_VALUE)],
            output: Some(Value::Int(v)),
        }],
        test: vec![],
    };
    Some((task, prog))
}

fn gen_grid_task(depth: usize, rng: &mut ChaCha8Rng) -> Option<(Task, Program)> {
    let registry = Domain::GridSym.registry();
    let prog = gen_grid_program(depth.max(1), &registry, rng);
    let mut train = Vec::new();
    for _ in 0..2 {
        let h = rng.random_range(1..=4);
        let w = rng.random_range(1..=4);
        let rows: Vec<Vec<u8>> =
            (0..h).map(|_| (0..w).map(|_| rng.random_range(0..10u8)).collect()).collect();
        let g = crate::values::Grid::from_rows(&rows).ok()?;
        let input = Value::Grid(g);
        let output = prog.eval(&registry, std::slice::from_ref(&input)).ok()?;
        if output == input {
            return None; // trivial on this example
        }
        train.push(Example { inputs: vec![input], output: Some(output) });
    }
    let task = Task { id: format!("grid-{}", rng.random_range(0..1_000_000u32)), train, test: vec![] };
    Some((task, prog))
}

fn gen_grid_program(budget: usize, registry: &Registry, rng: &mut ChaCha8Rng) -> Program {
    let unary = ["rotate_cw", "rotate_ccw", "flip_h", "flip_v"]
        .map(|n| registry.func_index(n).unwrap());
    let binary = ["hstack", "vstack"].map(|n| registry.func_index(n).unwrap());
    fn gen(
        budget: usize,
        top: bool,
        unary: &[usize; 4],
        binary: &[usize; 2],
        rng: &mut ChaCha8Rng,
    ) -> Program {
        if budget == 0 || (!top && rng.random_bool(0.4)) {
            return Program::Input(0);
        }
        if budget >= 2 && rng.random_bool(0.35) {
            let f = binary[rng.random_range(0..2)];
            let left = gen(budget - 1, false, unary, binary, rng);
            let used = left.size();
            let right = gen(budget - 1 - used, false, unary, binary, rng);
            Program::Apply { func: f, args: vec![left, right] }
        } else {
            let f = unary[rng.random_range(0..4)];
            let inner = gen(budget - 1, false, unary, binary, rng);
            Program::Apply { func: f, args: vec![inner] }
        }
    }
    gen(budget, true, &unary, &binary, rng)
}

/// Derive an independent per-record RNG stream from the master seed.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut h = crate::values::Fnv::new();
    h.write_u64(seed);
    h.write_u64(index);
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Generate `count` validated traces. Deterministic for a given config.
pub fn gen_dataset(cfg: &TraceGenConfig, count: usize) -> Vec<TraceRecord> {
    crate::par::map_indexed(count, |i| {
        let mut rng = stream_rng(cfg.seed, i as u64);
        for _ in 0..MAX_ATTEMPTS {
            let Some((task, prog)) = gen_random_task(cfg.domain, cfg.depth, &mut rng) else {
                continue;
            };
            if let Some(tr) = program_to_trace(&task, &prog, cfg.domain, cfg.p_invert, &mut rng)
            {
                return tr;
            }
        }
        panic!("trace generation failed after {MAX_ATTEMPTS} attempts (record {i})");
    })
}

pub fn write_jsonl(path: &Path, records: &[TraceRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<TraceRecord>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
