//! Experiment harness: task loading (ARC JSON and native formats), the
//! curated grid-symmetry suite, benchmark runs with CSV/manifest export, and
//! versioned policy checkpoints.

use crate::dsl::Domain;
use crate::env::{EnvConfig, SynthEnv};
use crate::policy::{NeuralPolicy, Policy};
use crate::program::{check_solution, Program};
use crate::tracegen::stream_rng;
use crate::values::{Example, Grid, Task, Value};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

// ---------------------------------------------------------------------------
// task loading

#[derive(Debug, Serialize, Deserialize)]
struct ArcExample {
    input: Vec<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<Vec<Vec<u8>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArcTask {
    train: Vec<ArcExample>,
    test: Vec<ArcExample>,
}

fn arc_example(ex: &ArcExample) -> std::io::Result<Example> {
    let bad = |e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{e}"));
    let input = Value::Grid(Grid::from_rows(&ex.input).map_err(bad)?);
    let output = match &ex.output {
        Some(rows) => Some(Value::Grid(Grid::from_rows(rows).map_err(bad)?)),
        None => None,
    };
    Ok(Example { inputs: vec![input], output })
}

/// Parse one task in the ARC JSON format (`{"train": [{"input": .., "output":
/// ..}], "test": [..]}`); the id is the file stem.
pub fn load_arc_task(path: &Path) -> std::io::Result<Task> {
    let mut s = String::new();
    std::fs::File::open(path)?.read_to_string(&mut s)?;
    let arc: ArcTask = serde_json::from_str(&s)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let task = Task {
        id,
        train: arc.train.iter().map(|e| arc_example(e)).collect::<Result<_, _>>()?,
        test: arc.test.iter().map(|e| arc_example(e)).collect::<Result<_, _>>()?,
    };
    task.validate()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{e}")))?;
    Ok(task)
}

/// Write a grid task back out in the ARC JSON format.
pub fn save_arc_task(path: &Path, task: &Task) -> std::io::Result<()> {
    let to_arc = |ex: &Example| -> std::io::Result<ArcExample> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let [input] = ex.inputs.as_slice() else { return Err(bad("ARC tasks take one input")) };
        let Value::Grid(g) = input else { return Err(bad("ARC input must be a grid")) };
        let output = match &ex.output {
            Some(Value::Grid(g)) => Some(g.rows()),
            Some(_) => return Err(bad("ARC output must be a grid")),
            None => None,
        };
        Ok(ArcExample { input: g.rows(), output })
    };
    let arc = ArcTask {
        train: task.train.iter().map(to_arc).collect::<Result<_, _>>()?,
        test: task.test.iter().map(to_arc).collect::<Result<_, _>>()?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(&arc)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Load tasks from a path: a directory of ARC `.json` files, a single ARC
/// `.json` file, or a `.jsonl` file of native `Task` records.
pub fn load_tasks(path: &Path) -> std::io::Result<Vec<Task>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        return files.iter().map(|p| load_arc_task(p)).collect();
    }
    if path.extension().is_some_and(|x| x == "jsonl") {
        let s = std::fs::read_to_string(path)?;
        return s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let task: Task = serde_json::from_str(l)?;
                Ok(task)
            })
            .collect();
    }
    Ok(vec![load_arc_task(path)?])
}

// ---------------------------------------------------------------------------
// curated symmetry programs and the synthetic suite

/// A named symmetry task template: the reference program in s-expression
/// form, over the grid DSL, with `$0` the input grid. The ARC ids identify
/// the corpus tasks each template reproduces (for users who have the corpus;
/// none of that data ships here).
pub struct SymmetryTemplate {
    pub name: &'static str,
    pub arc_ids: &'static [&'static str],
    pub build: fn() -> Program,
}

fn prog(name: &str, args: Vec<Program>) -> Program {
    let registry = Domain::GridSym.registry();
    Program::Apply { func: registry.func_index(name).unwrap(), args }
}

fn p_input() -> Program {
    Program::Input(0)
}

pub const SYMMETRY_TEMPLATES: &[SymmetryTemplate] = &[
    SymmetryTemplate {
        name: "flip_h",
        arc_ids: &["67a3a6ac"],
        build: || prog("flip_h", vec![p_input()]),
    },
    SymmetryTemplate {
        name: "flip_v",
        arc_ids: &["68b16354"],
        build: || prog("flip_v", vec![p_input()]),
    },
    SymmetryTemplate {
        name: "rotate_ccw",
        arc_ids: &["ed36ccf7"],
        build: || prog("rotate_ccw", vec![p_input()]),
    },
    SymmetryTemplate {
        name: "transpose",
        arc_ids: &["74dd1130", "9dfd6313"],
        build: || prog("rotate_cw", vec![prog("flip_v", vec![p_input()])]),
    },
    SymmetryTemplate {
        name: "mirror_right",
        arc_ids: &["6d0aefbc", "c9e6f938"],
        build: || prog("hstack", vec![p_input(), prog("flip_h", vec![p_input()])]),
    },
    SymmetryTemplate {
        name: "mirror_down",
        arc_ids: &["8be77c9e", "6fa7a44f"],
        build: || prog("vstack", vec![p_input(), prog("flip_v", vec![p_input()])]),
    },
    SymmetryTemplate {
        name: "mirror_up",
        arc_ids: &["4c4377d9"],
        build: || prog("vstack", vec![prog("flip_v", vec![p_input()]), p_input()]),
    },
    SymmetryTemplate {
        name: "duplicate_right",
        arc_ids: &["a416b8f3"],
        build: || prog("hstack", vec![p_input(), p_input()]),
    },
    SymmetryTemplate {
        name: "quad_mirror",
        arc_ids: &["62c24649", "3af2c5a8"],
        build: || {
            let top = prog("hstack", vec![p_input(), prog("flip_h", vec![p_input()])]);
            prog("vstack", vec![top.clone(), prog("flip_v", vec![top])])
        },
    },
    SymmetryTemplate {
        name: "mirror_quad_row",
        arc_ids: &["task_138"],
        build: || {
            let half = prog("hstack", vec![prog("flip_h", vec![p_input()]), p_input()]);
            prog("hstack", vec![half.clone(), half])
        },
    },
];

/// Synthetic suite: `per_template` tasks from each curated template, on
/// random input grids, each with 2 train examples and 1 checked test example.
pub fn gen_symmetry_suite(per_template: usize, seed: u64) -> Vec<(Task, Program)> {
    let registry = Domain::GridSym.registry();
    let mut out = Vec::new();
    for (ti, tmpl) in SYMMETRY_TEMPLATES.iter().enumerate() {
        let program = (tmpl.build)();
        for i in 0..per_template {
            let mut rng = stream_rng(seed ^ ((ti as u64) << 32), i as u64);
            let task = loop {
                let mut examples = Vec::new();
                let mut ok = true;
                for _ in 0..3 {
                    use rand::Rng;
                    let h = rng.random_range(2..=5);
                    let w = rng.random_range(2..=5);
                    let rows: Vec<Vec<u8>> = (0..h)
                        .map(|_| (0..w).map(|_| rng.random_range(0..10u8)).collect())
                        .collect();
                    let g = Grid::from_rows(&rows).expect("small grid");
                    let input = Value::Grid(g);
                    match program.eval(&registry, std::slice::from_ref(&input)) {
                        Ok(output) if output != input => {
                            examples.push(Example { inputs: vec![input], output: Some(output) });
                        }
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    let test = examples.split_off(2);
                    break Task {
                        id: format!("{}-{i}", tmpl.name),
                        train: examples,
                        test,
                    };
                }
            };
            out.push((task, program.clone()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// benchmark runs and result export

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub task_id: String,
    pub domain: Domain,
    pub mode: String,
    pub policy: String,
    pub solved: bool,
    pub steps: usize,
    pub invalid_actions: usize,
    pub nodes: usize,
    pub program: String,
    pub program_size: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub domain: Domain,
    pub mode: String,
    pub policy: String,
    pub seed: u64,
    pub episodes_per_task: usize,
    pub max_steps: usize,
    pub num_tasks: usize,
    pub num_solved: usize,
    pub solve_rate: f64,
}

/// Run up to `episodes_per_task` episodes per task (stopping early on solve
/// or when the optional per-task wall-clock budget runs out) and collect
/// per-task results. A task counts as solved if any episode finds a verified
/// program.
pub fn run_benchmark(
    tasks: &[Task],
    policy_factory: &(dyn Fn() -> Box<dyn Policy> + Sync),
    env_cfg: EnvConfig,
    episodes_per_task: usize,
    timeout: Option<std::time::Duration>,
    seed: u64,
) -> Vec<ResultRow> {
    crate::par::map_indexed(tasks.len(), |ti| {
        let task = &tasks[ti];
        let start = Instant::now();
        let mut best: Option<(Program, usize, usize, usize)> = None;
        let mut last_steps = 0;
        let mut last_invalid = 0;
        let mut last_nodes = 0;
        let mut policy_name = "";
        for rep in 0..episodes_per_task {
            if timeout.is_some_and(|t| start.elapsed() >= t) {
                break;
            }
            let mut rng = stream_rng(seed ^ ((ti as u64) << 20), rep as u64);
            let mut policy = policy_factory();
            policy_name = policy.name();
            let Ok(mut env) = SynthEnv::new(task.clone(), env_cfg) else { break };
            env.reset();
            while !env.done() {
                let obs = env.observe();
                let mask = env.valid_action_mask();
                let Some(action) = policy.select_action(&obs, &mask, &mut rng) else { break };
                env.step(&action);
            }
            last_steps = env.steps_taken();
            last_invalid = env.invalid_actions();
            last_nodes = env.graph().nodes().len();
            if let Some(p) = env.solution() {
                if check_solution(p, task, env.registry()) {
                    best = Some((p.clone(), last_steps, last_invalid, last_nodes));
                    break;
                }
            }
        }
        let registry = env_cfg.domain.registry();
        let (solved, program, size, steps, invalid, nodes) = match &best {
            Some((p, s, iv, n)) => (true, p.pretty(&registry), p.size(), *s, *iv, *n),
            None => (false, String::new(), 0, last_steps, last_invalid, last_nodes),
        };
        ResultRow {
            task_id: task.id.clone(),
            domain: env_cfg.domain,
            mode: if env_cfg.forward_only { "fwd".into() } else { "bidir".into() },
            policy: policy_name.to_string(),
            solved,
            steps,
            invalid_actions: invalid,
            nodes,
            program,
            program_size: size,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    })
}

pub fn solve_rate(rows: &[ResultRow]) -> f64 {
    rows.iter().filter(|r| r.solved).count() as f64 / rows.len().max(1) as f64
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write results as CSV with a fixed header. Wall-clock time is deliberately
/// excluded so a rerun from the same manifest is byte-identical.
pub fn export_results(path: &Path, rows: &[ResultRow]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "task_id,domain,mode,policy,solved,steps,invalid_actions,nodes,program,program_size"
    )?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_escape(&r.task_id),
            r.domain,
            r.mode,
            r.policy,
            r.solved,
            r.steps,
            r.invalid_actions,
            r.nodes,
            csv_escape(&r.program),
            r.program_size,
        )?;
    }
    Ok(())
}

pub fn export_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// reference solvers (oracles)

/// Exhaustive forward enumeration by program size: the smallest program (if
/// any, up to `max_size` applications) whose value tuple matches the output
/// on every training example. Independent of the search graph; used as a
/// reference solver and test oracle.
pub fn brute_force_program(
    task: &Task,
    registry: &crate::ops::Registry,
    max_size: usize,
) -> Option<Program> {
    use crate::ops::apply_forward;
    use crate::values::ExampleTuple;
    use std::collections::HashMap;

    let target = task.output_tuple();
    // per size level: (tuple, program); `seen` keeps only the first (minimal)
    let mut levels: Vec<Vec<(ExampleTuple, Program)>> = vec![Vec::new()];
    let mut seen: HashMap<ExampleTuple, ()> = HashMap::new();
    for i in 0..task.num_inputs() {
        let t = task.input_tuple(i);
        if seen.contains_key(&t) {
            continue;
        }
        if t == target {
            return Some(Program::Input(i));
        }
        seen.insert(t.clone(), ());
        levels[0].push((t, Program::Input(i)));
    }
    for size in 1..=max_size {
        let mut level = Vec::new();
        for (fi, f) in registry.functions().iter().enumerate() {
            let arity = f.arity();
            // argument sizes summing to size - 1
            let mut sizes = vec![0usize; arity];
            loop {
                if sizes.iter().sum::<usize>() == size - 1 {
                    let pools: Vec<&[(ExampleTuple, Program)]> =
                        sizes.iter().map(|&s| levels[s].as_slice()).collect();
                    let mut idx = vec![0usize; arity];
                    'combo: loop {
                        if pools.iter().all(|p| !p.is_empty()) {
                            let args: Vec<&ExampleTuple> =
                                idx.iter().zip(&pools).map(|(&i, p)| &p[i].0).collect();
                            if let Ok(out) = apply_forward(f, &args) {
                                if !seen.contains_key(&out) {
                                    let prog = Program::Apply {
                                        func: fi,
                                        args: idx
                                            .iter()
                                            .zip(&pools)
                                            .map(|(&i, p)| p[i].1.clone())
                                            .collect(),
                                    };
                                    if out == target {
                                        return Some(prog);
                                    }
                                    seen.insert(out.clone(), ());
                                    level.push((out, prog));
                                }
                            }
                        }
                        // advance the cartesian product
                        let mut k = arity;
                        loop {
                            if k == 0 {
                                break 'combo;
                            }
                            k -= 1;
                            idx[k] += 1;
                            if idx[k] < pools[k].len() {
                                break;
                            }
                            idx[k] = 0;
                        }
                    }
                }
                // advance the size partition
                let mut k = arity;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    sizes[k] += 1;
                    if sizes[k] <= size - 1 {
                        break;
                    }
                    sizes[k] = 0;
                }
                if sizes.iter().all(|&s| s == 0) {
                    break;
                }
            }
        }
        levels.push(level);
    }
    None
}

/// Minimal double-and-add chain from the start value to `target`: halve when
/// even, subtract one when odd.
pub fn doubleadd_program(target: u64) -> Option<Program> {
    use crate::dsl::doubleadd::START_VALUE;
    if target < START_VALUE {
        return None;
    }
    let registry = Domain::DoubleAdd.registry();
    let add_one = registry.func_index("add_one").unwrap();
    let double = registry.func_index("double").unwrap();
    let mut steps = Vec::new();
    let mut n = target;
    while n > START_VALUE {
        if n % 2 == 0 && n / 2 >= START_VALUE {
            steps.push(double);
            n /= 2;
        } else {
            steps.push(add_one);
            n -= 1;
        }
    }
    let mut prog = Program::Input(0);
    for &f in steps.iter().rev() {
        prog = Program::Apply { func: f, args: vec![prog] };
    }
    Some(prog)
}

/// Ground-truth program for a task, found without the search graph. Used by
/// the scripted oracle policy.
pub fn oracle_program(domain: Domain, task: &Task) -> Option<Program> {
    let registry = domain.registry();
    let program = match domain {
        Domain::Arith24 => brute_force_program(task, &registry, 3)?,
        Domain::GridSym => {
            // curated templates first (they cover larger programs cheaply)
            SYMMETRY_TEMPLATES
                .iter()
                .map(|t| (t.build)())
                .find(|p| check_solution(p, task, &registry))
                .or_else(|| brute_force_program(task, &registry, 4))?
        }
        Domain::DoubleAdd => {
            let target = match task.train[0].output.as_ref()? {
                Value::Int(n) => *n,
                _ => return None,
            };
            doubleadd_program(target)?
        }
    };
    check_solution(&program, task, &registry).then_some(program)
}

// ---------------------------------------------------------------------------
// checkpoints

const CHECKPOINT_MAGIC: &[u8; 4] = b"BSYN";
const CHECKPOINT_VERSION: u32 = 1;

fn domain_tag(d: Domain) -> u8 {
    match d {
        Domain::GridSym => 0,
        Domain::Arith24 => 1,
        Domain::DoubleAdd => 2,
    }
}

fn domain_from_tag(t: u8) -> std::io::Result<Domain> {
    match t {
        0 => Ok(Domain::GridSym),
        1 => Ok(Domain::Arith24),
        2 => Ok(Domain::DoubleAdd),
        other => Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unknown domain tag {other}"),
        )),
    }
}

/// Binary checkpoint: magic, version, domain tag, then every named parameter
/// tensor with its shape, little-endian f64.
pub fn save_checkpoint(path: &Path, policy: &NeuralPolicy) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CHECKPOINT_MAGIC)?;
    f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    f.write_all(&[domain_tag(policy.domain)])?;
    f.write_all(&(policy.params.len() as u32).to_le_bytes())?;
    for (name, t) in policy.params.entries() {
        f.write_all(&(name.len() as u32).to_le_bytes())?;
        f.write_all(name.as_bytes())?;
        f.write_all(&(t.rows as u32).to_le_bytes())?;
        f.write_all(&(t.cols as u32).to_le_bytes())?;
        for v in &t.data {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> std::io::Result<NeuralPolicy> {
    let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a policy checkpoint (bad magic)".into()));
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut tag = [0u8; 1];
    f.read_exact(&mut tag)?;
    let domain = domain_from_tag(tag[0])?;
    f.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;

    // a fresh policy pins the expected parameter names and shapes
    let mut policy = NeuralPolicy::new(domain, 0);
    if count != policy.params.len() {
        return Err(bad(format!(
            "checkpoint has {count} tensors, expected {}",
            policy.params.len()
        )));
    }
    let mut flat = policy.params.to_flat();
    let mut offsets = std::collections::HashMap::new();
    {
        let mut off = 0;
        for (name, t) in policy.params.entries() {
            offsets.insert(name.clone(), (off, t.rows, t.cols));
            off += t.data.len();
        }
    }
    for _ in 0..count {
        f.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| bad(format!("{e}")))?;
        f.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        f.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        let Some(&(off, erows, ecols)) = offsets.get(&name) else {
            return Err(bad(format!("unexpected tensor {name:?}")));
        };
        if (rows, cols) != (erows, ecols) {
            return Err(bad(format!(
                "tensor {name:?} has shape {rows}x{cols}, expected {erows}x{ecols}"
            )));
        }
        let mut buf = [0u8; 8];
        for i in 0..rows * cols {
            f.read_exact(&mut buf)?;
            flat[off + i] = f64::from_le_bytes(buf);
        }
    }
    policy.params.load_flat(&flat);
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::RandomPolicy;

    #[test]
    fn arc_task_roundtrip() {
        let suite = gen_symmetry_suite(1, 3);
        let dir = tempfile::tempdir().unwrap();
        for (task, _) in &suite {
            let path = dir.path().join(format!("{}.json", task.id));
            save_arc_task(&path, task).unwrap();
            let loaded = load_arc_task(&path).unwrap();
            assert_eq!(*task, loaded);
        }
    }

    #[test]
    fn symmetry_suite_is_consistent() {
        let registry = Domain::GridSym.registry();
        for (task, program) in gen_symmetry_suite(3, 1) {
            task.validate().unwrap();
            assert!(check_solution(&program, &task, &registry), "{}", task.id);
        }
    }

    #[test]
    fn symmetry_templates_cover_identities() {
        // the transpose template really is transposition
        let registry = Domain::GridSym.registry();
        let t = SYMMETRY_TEMPLATES.iter().find(|t| t.name == "transpose").unwrap();
        let g = Grid::from_rows(&[vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let out = (t.build)().eval(&registry, &[Value::Grid(g.clone())]).unwrap();
        let expected: Vec<Vec<u8>> = vec![vec![1, 4], vec![2, 5], vec![3, 6]];
        assert_eq!(out, Value::Grid(Grid::from_rows(&expected).unwrap()));
    }

    #[test]
    fn benchmark_random_solves_unary_suite() {
        let tasks: Vec<Task> = gen_symmetry_suite(2, 9)
            .into_iter()
            .map(|(t, _)| t)
            .filter(|t| t.id.starts_with("flip") || t.id.starts_with("rotate"))
            .collect();
        let rows = run_benchmark(
            &tasks,
            &|| Box::new(RandomPolicy),
            EnvConfig::new(Domain::GridSym),
            20,
            None,
            77,
        );
        assert_eq!(rows.len(), tasks.len());
        assert!(solve_rate(&rows) > 0.9, "rate {}", solve_rate(&rows));
        for r in rows.iter().filter(|r| r.solved) {
            assert!(!r.program.is_empty());
            assert!(r.program_size >= 1);
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let tasks: Vec<Task> =
            gen_symmetry_suite(1, 2).into_iter().take(3).map(|(t, _)| t).collect();
        let rows = run_benchmark(
            &tasks,
            &|| Box::new(RandomPolicy),
            EnvConfig::new(Domain::GridSym),
            2,
            None,
            1,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        export_results(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), rows.len() + 1);
        assert!(lines[0].starts_with("task_id,domain,mode"));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let policy = NeuralPolicy::new(Domain::Arith24, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        save_checkpoint(&path, &policy).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.domain, policy.domain);
        assert_eq!(loaded.params.to_flat(), policy.params.to_flat());
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let policy = NeuralPolicy::new(Domain::DoubleAdd, 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        save_checkpoint(&path, &policy).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
