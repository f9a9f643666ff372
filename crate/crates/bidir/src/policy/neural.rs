//! The learned policy: set-style value embedders, a DeepSet graph summary,
//! a masked op head, and pointer-style sequential argument selection. All of
//! it runs on the crate's own tape-based autodiff, so the same forward pass
//! serves sampling, supervised scoring, and REINFORCE gradients.

use crate::dsl::Domain;
use crate::env::{Action, ActionMask, Observation};
use crate::nn::{ConvSpec, GradStore, ParamStore, Tape, Tensor, Var};
use crate::values::{Value, MAX_GRID_SIDE, MAX_INT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shared embedding width.
pub const HIDDEN: usize = 64;
/// Op-embedding width for the pointer query.
pub const OP_EMB: usize = 32;
/// Integers are encoded as 24 low bits plus two magnitude features.
pub const INT_BITS: usize = 24;
pub const INT_FEATURES: usize = INT_BITS + 2;
/// Upper bound on argument slots per operation variant.
pub const MAX_SLOTS: usize = 3;
/// Per-node structural flags: grounded, is_input, is_output, plus one
/// one-step-lookahead flag per registry function.
const BASE_NODE_FLAGS: usize = 3;

const CONV1: ConvSpec = ConvSpec {
    in_channels: 10,
    height: MAX_GRID_SIDE,
    width: MAX_GRID_SIDE,
    kernel: 3,
    stride: 2,
    pad: 1,
};
const CONV2: ConvSpec =
    ConvSpec { in_channels: 8, height: 15, width: 15, kernel: 3, stride: 2, pad: 1 };
const CONV3: ConvSpec =
    ConvSpec { in_channels: 16, height: 8, width: 8, kernel: 3, stride: 2, pad: 1 };
const CONV_OUT_CHANNELS: usize = 32;

/// A sampled or scored action together with the tape that produced its score,
/// ready for a backward pass.
pub struct ScoredAction<'p> {
    pub action: Action,
    pub tape: Tape<'p>,
    /// Scalar: total log-probability of the action (op choice plus slots).
    pub logp: Var,
    /// Scalar: summed entropy of every distribution sampled from.
    pub entropy: Var,
}

#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    pub domain: Domain,
    pub params: ParamStore,
    /// Number of operation variants the op head covers (full bidirectional
    /// enumeration; forward-only episodes simply mask the rest out).
    pub num_variants: usize,
}

impl NeuralPolicy {
    pub fn new(domain: Domain, seed: u64) -> Self {
        let registry = domain.registry();
        let num_variants = registry.enumerate_operations(false).len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let dense = |p: &mut ParamStore, name: &str, rows: usize, cols: usize,
                         rng: &mut ChaCha8Rng| {
            p.add(&format!("{name}.w"), Tensor::glorot(rows, cols, rng));
            p.add(&format!("{name}.b"), Tensor::zeros(1, cols));
        };

        // integer embedder: F -> H -> H
        dense(&mut p, "int1", INT_FEATURES, HIDDEN, &mut rng);
        dense(&mut p, "int2", HIDDEN, HIDDEN, &mut rng);

        // Grid embedder: three strided conv stages, then a projection.
        // Conv biases start slightly positive: all-empty canvas patches have
        // an exactly-zero pre-activation under a zero bias, parking those
        // units on the ReLU kink where the loss is not differentiable.
        let conv_bias = |rows: usize| Tensor::from_vec(rows, 1, vec![0.01; rows]);
        p.add("conv1.k", Tensor::glorot(8, CONV1.patch_len(), &mut rng));
        p.add("conv1.b", conv_bias(8));
        p.add("conv2.k", Tensor::glorot(16, CONV2.patch_len(), &mut rng));
        p.add("conv2.b", conv_bias(16));
        p.add("conv3.k", Tensor::glorot(CONV_OUT_CHANNELS, CONV3.patch_len(), &mut rng));
        p.add("conv3.b", conv_bias(CONV_OUT_CHANNELS));
        dense(&mut p, "gproj", CONV_OUT_CHANNELS, HIDDEN, &mut rng);

        // node refinement after appending flags
        let node_flags = BASE_NODE_FLAGS + registry.functions().len();
        dense(&mut p, "node", HIDDEN + node_flags, HIDDEN, &mut rng);

        // DeepSet aggregator
        dense(&mut p, "phi", HIDDEN, HIDDEN, &mut rng);
        dense(&mut p, "rho", HIDDEN, HIDDEN, &mut rng);

        // op head and op embedding table
        dense(&mut p, "ophead", HIDDEN, num_variants, &mut rng);
        p.add("opemb", Tensor::glorot(num_variants, OP_EMB, &mut rng));

        // pointer query
        let qin = HIDDEN + OP_EMB + HIDDEN + MAX_SLOTS;
        dense(&mut p, "query", qin, HIDDEN, &mut rng);

        NeuralPolicy { domain, params: p, num_variants }
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    /// Sample an action; returns its log-probability too.
    pub fn sample(
        &self,
        obs: &Observation,
        mask: &ActionMask,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Action, f64)> {
        let scored = self.propose(obs, mask, Some(rng), None)?;
        let logp = scored.tape.val(scored.logp).data[0];
        Some((scored.action, logp))
    }

    /// Score a given (mask-permitted) action without sampling.
    pub fn score<'p>(
        &'p self,
        obs: &Observation,
        mask: &ActionMask,
        action: &Action,
    ) -> Option<ScoredAction<'p>> {
        self.propose(obs, mask, None, Some(action))
    }

    /// Accumulate the gradient of `-(scale * logp + entropy_weight * H)` for
    /// one step; returns (logp, entropy). This is the supervised NLL gradient
    /// for `scale = 1` and the REINFORCE per-step gradient for
    /// `scale = advantage`.
    pub fn accumulate_step_grad(
        &self,
        obs: &Observation,
        mask: &ActionMask,
        action: &Action,
        scale: f64,
        entropy_weight: f64,
        grads: &mut GradStore,
    ) -> Option<(f64, f64)> {
        let scored = self.score(obs, mask, action)?;
        let logp = scored.tape.val(scored.logp).data[0];
        let ent = scored.tape.val(scored.entropy).data[0];
        scored.tape.backward(scored.logp, -scale, grads);
        if entropy_weight != 0.0 {
            scored.tape.backward(scored.entropy, -entropy_weight, grads);
        }
        Some((logp, ent))
    }

    /// Core forward pass. Exactly one of `rng` (sample) and `forced` (score)
    /// should be provided.
    fn propose<'p>(
        &'p self,
        obs: &Observation,
        mask: &ActionMask,
        mut rng: Option<&mut ChaCha8Rng>,
        forced: Option<&Action>,
    ) -> Option<ScoredAction<'p>> {
        if let Some(a) = forced {
            if !mask.permits(a) {
                return None;
            }
        }
        let mut tape = Tape::new(&self.params);
        let node_embs = self.embed_nodes(&mut tape, obs);
        let graph_emb = self.graph_embedding(&mut tape, node_embs);

        // variant mask, padded to the full bidirectional enumeration
        let vmask: Vec<bool> = (0..self.num_variants)
            .map(|i| mask.variants.get(i).is_some_and(|v| v.allowed))
            .collect();
        if !vmask.iter().any(|&b| b) {
            return None;
        }

        let logits = self.linear(&mut tape, graph_emb, "ophead");
        let logits = tape.transpose(logits);
        let op_logp = tape.log_softmax_masked(logits, vmask.clone());
        let variant = match forced {
            Some(a) => a.variant,
            None => sample_masked(tape.val(op_logp), &vmask, rng.as_deref_mut().unwrap()),
        };
        let mut logp = tape.pick(op_logp, variant);
        let mut entropy = tape.entropy(op_logp, vmask);

        let opemb_table = tape.param("opemb");
        let op_emb = tape.row(opemb_table, variant);

        let slots = &mask.variants[variant].slots;
        assert!(slots.len() <= MAX_SLOTS);
        let mut arg_node_ids = Vec::with_capacity(slots.len());
        let mut chosen_embs: Option<Var> = None;
        for (s, slot_mask) in slots.iter().enumerate() {
            let prev = match chosen_embs {
                Some(v) => tape.mean_groups(v, arg_node_ids.len()),
                None => tape.constant(Tensor::zeros(1, HIDDEN)),
            };
            let mut onehot = Tensor::zeros(1, MAX_SLOTS);
            onehot.data[s] = 1.0;
            let onehot = tape.constant(onehot);
            let q = tape.concat_cols(graph_emb, op_emb);
            let q = tape.concat_cols(q, prev);
            let q = tape.concat_cols(q, onehot);
            let q = self.linear(&mut tape, q, "query");
            let q = tape.relu(q);
            let qt = tape.transpose(q);
            let scores = tape.matmul(node_embs, qt);
            let slot_logp = tape.log_softmax_masked(scores, slot_mask.clone());
            let node = match forced {
                Some(a) => a.arg_node_ids[s],
                None => {
                    sample_masked(tape.val(slot_logp), slot_mask, rng.as_deref_mut().unwrap())
                }
            };
            let picked = tape.pick(slot_logp, node);
            logp = tape.add(logp, picked);
            let h = tape.entropy(slot_logp, slot_mask.clone());
            entropy = tape.add(entropy, h);
            let emb = tape.row(node_embs, node);
            chosen_embs = Some(match chosen_embs {
                Some(prev_rows) => tape.concat_rows(prev_rows, emb),
                None => emb,
            });
            arg_node_ids.push(node);
        }

        Some(ScoredAction { action: Action { variant, arg_node_ids }, tape, logp, entropy })
    }

    /// Embed every node into a (N, HIDDEN) matrix: per-example value
    /// embedding, mean-pooled over the K examples, flags appended, refined.
    fn embed_nodes(&self, tape: &mut Tape<'_>, obs: &Observation) -> Var {
        let k = obs.nodes[0].value.len();
        let pooled = match obs.nodes[0].value.get(0) {
            Value::Int(_) => {
                // one big (N*K, F) batch through the int MLP
                let n = obs.nodes.len();
                let mut feats = Tensor::zeros(n * k, INT_FEATURES);
                for (ni, node) in obs.nodes.iter().enumerate() {
                    for ei in 0..k {
                        let v = node.value.get(ei).as_int().expect("int domain");
                        let row = &mut feats.data
                            [(ni * k + ei) * INT_FEATURES..(ni * k + ei + 1) * INT_FEATURES];
                        for b in 0..INT_BITS {
                            row[b] = ((v >> b) & 1) as f64;
                        }
                        row[INT_BITS] = v as f64 / MAX_INT as f64;
                        row[INT_BITS + 1] = ((v + 1) as f64).log2() / INT_BITS as f64;
                    }
                }
                let x = tape.constant(feats);
                let h = self.linear(tape, x, "int1");
                let h = tape.relu(h);
                let h = self.linear(tape, h, "int2");
                let h = tape.relu(h);
                tape.mean_groups(h, k)
            }
            Value::Grid(_) => {
                // conv per (node, example); means stacked into (N, HIDDEN)
                let mut rows: Option<Var> = None;
                for node in &obs.nodes {
                    let mut per_example: Option<Var> = None;
                    for ei in 0..k {
                        let g = node.value.get(ei).as_grid().expect("grid domain");
                        let emb = self.embed_grid(tape, g);
                        per_example = Some(match per_example {
                            Some(prev) => tape.concat_rows(prev, emb),
                            None => emb,
                        });
                    }
                    let stacked = per_example.unwrap();
                    let pooled = tape.mean_groups(stacked, k);
                    rows = Some(match rows {
                        Some(prev) => tape.concat_rows(prev, pooled),
                        None => pooled,
                    });
                }
                rows.unwrap()
            }
        };
        let node_flags = BASE_NODE_FLAGS + obs.nodes[0].one_step.len();
        let mut flags = Tensor::zeros(obs.nodes.len(), node_flags);
        for (ni, node) in obs.nodes.iter().enumerate() {
            let row = &mut flags.data[ni * node_flags..(ni + 1) * node_flags];
            row[0] = node.grounded as u8 as f64;
            row[1] = node.is_input as u8 as f64;
            row[2] = node.is_output as u8 as f64;
            for (fi, &hit) in node.one_step.iter().enumerate() {
                row[BASE_NODE_FLAGS + fi] = hit as u8 as f64;
            }
        }
        let flags = tape.constant(flags);
        let x = tape.concat_cols(pooled, flags);
        let x = self.linear(tape, x, "node");
        tape.relu(x)
    }

    /// One grid -> (1, HIDDEN) through the conv stack. The grid sits in the
    /// top-left of a 30x30 canvas; cells outside it are zero in all channels.
    fn embed_grid(&self, tape: &mut Tape<'_>, g: &crate::values::Grid) -> Var {
        let hw = MAX_GRID_SIDE * MAX_GRID_SIDE;
        let mut x = Tensor::zeros(10, hw);
        for r in 0..g.height() {
            for c in 0..g.width() {
                let ch = g.get(r, c).code() as usize;
                x.data[ch * hw + r * MAX_GRID_SIDE + c] = 1.0;
            }
        }
        let x = tape.constant(x);
        let x = self.conv(tape, x, CONV1, "conv1");
        let x = self.conv(tape, x, CONV2, "conv2");
        let x = self.conv(tape, x, CONV3, "conv3");
        let pooled = tape.mean_cols(x);
        let pooled = tape.transpose(pooled);
        let h = self.linear(tape, pooled, "gproj");
        tape.relu(h)
    }

    fn conv(&self, tape: &mut Tape<'_>, x: Var, spec: ConvSpec, name: &str) -> Var {
        let k = tape.param(&format!("{name}.k"));
        let b = tape.param(&format!("{name}.b"));
        let cols = tape.im2col(x, spec);
        let y = tape.matmul(k, cols);
        let y = tape.add_col(y, b);
        tape.relu(y)
    }

    fn graph_embedding(&self, tape: &mut Tape<'_>, node_embs: Var) -> Var {
        let h = self.linear(tape, node_embs, "phi");
        let h = tape.relu(h);
        let pooled = tape.mean_rows(h);
        let g = self.linear(tape, pooled, "rho");
        tape.relu(g)
    }

    fn linear(&self, tape: &mut Tape<'_>, x: Var, name: &str) -> Var {
        let w = tape.param(&format!("{name}.w"));
        let b = tape.param(&format!("{name}.b"));
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }
}

/// Inverse-CDF sample over the unmasked entries of a log-prob column vector.
fn sample_masked(logp: &Tensor, mask: &[bool], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    let mut last = None;
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        acc += logp.data[i].exp();
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("sample from empty mask")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Domain;
    use crate::env::{EnvConfig, SynthEnv};
    use crate::nn::GradStore;
    use crate::values::{Example, Task, Value};

    fn arith_env() -> SynthEnv {
        let task = Task {
            id: "t".into(),
            train: vec![Example {
                inputs: vec![Value::Int(2), Value::Int(3)],
                output: Some(Value::Int(6)),
            }],
            test: vec![],
        };
        SynthEnv::new(task, EnvConfig::new(Domain::Arith24)).unwrap()
    }

    fn grid_env() -> SynthEnv {
        let g = crate::values::Grid::from_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        let out = crate::dsl::grids::flip_h(&g);
        let task = Task {
            id: "g".into(),
            train: vec![Example {
                inputs: vec![Value::Grid(g)],
                output: Some(Value::Grid(out)),
            }],
            test: vec![],
        };
        SynthEnv::new(task, EnvConfig::new(Domain::GridSym)).unwrap()
    }

    #[test]
    fn sampled_actions_are_valid_and_scored_consistently() {
        let mut env = arith_env();
        let policy = NeuralPolicy::new(Domain::Arith24, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs = env.reset();
        let mask = env.valid_action_mask();
        for _ in 0..50 {
            let (action, logp) = policy.sample(&obs, &mask, &mut rng).unwrap();
            assert!(mask.permits(&action));
            assert!(logp <= 0.0);
            let rescored = policy.score(&obs, &mask, &action).unwrap();
            let relogp = rescored.tape.val(rescored.logp).data[0];
            assert!((logp - relogp).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut env = arith_env();
        let policy = NeuralPolicy::new(Domain::Arith24, 1);
        let obs = env.reset();
        let mask = env.valid_action_mask();
        let pick = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|_| policy.sample(&obs, &mask, &mut rng).unwrap().0).collect::<Vec<_>>()
        };
        assert_eq!(pick(3), pick(3));
        assert_ne!(pick(3), pick(4));
    }

    #[test]
    fn grid_policy_runs_and_masks_forward_only() {
        let mut env = grid_env();
        let policy = NeuralPolicy::new(Domain::GridSym, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = env.reset();
        let mask = env.valid_action_mask();
        let (action, _) = policy.sample(&obs, &mask, &mut rng).unwrap();
        assert!(mask.permits(&action));

        // forward-only env exposes fewer variants; the same net still works
        let mut fwd_cfg = EnvConfig::new(Domain::GridSym);
        fwd_cfg.forward_only = true;
        let mut fenv = SynthEnv::new(env.task().clone(), fwd_cfg).unwrap();
        let fobs = fenv.reset();
        let fmask = fenv.valid_action_mask();
        for _ in 0..20 {
            let (a, _) = policy.sample(&fobs, &fmask, &mut rng).unwrap();
            assert!(a.variant < fmask.variants.len());
            assert!(fmask.permits(&a));
        }
    }

    #[test]
    fn step_gradients_are_finite_and_nonzero() {
        let mut env = arith_env();
        let policy = NeuralPolicy::new(Domain::Arith24, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs = env.reset();
        let mask = env.valid_action_mask();
        let (action, _) = policy.sample(&obs, &mask, &mut rng).unwrap();
        let mut grads = GradStore::zeros_like(&policy.params);
        let (logp, ent) = policy
            .accumulate_step_grad(&obs, &mask, &action, 1.0, 0.01, &mut grads)
            .unwrap();
        assert!(logp.is_finite() && logp <= 0.0);
        assert!(ent.is_finite() && ent >= 0.0);
        let flat = grads.to_flat();
        assert!(flat.iter().all(|v| v.is_finite()));
        assert!(flat.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn probabilities_sum_to_one_over_mask() {
        let mut env = arith_env();
        let policy = NeuralPolicy::new(Domain::Arith24, 4);
        let obs = env.reset();
        let mask = env.valid_action_mask();
        // enumerate all (variant, args) actions and check total probability
        let mut total = 0.0;
        for (vi, vm) in mask.variants.iter().enumerate() {
            if !vm.allowed {
                continue;
            }
            let mut combos: Vec<Vec<usize>> = vec![vec![]];
            for slot in &vm.slots {
                let cands: Vec<usize> =
                    slot.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        cands.iter().map(move |&n| {
                            let mut c2 = c.clone();
                            c2.push(n);
                            c2
                        })
                    })
                    .collect();
            }
            for args in combos {
                let a = Action { variant: vi, arg_node_ids: args };
                let s = policy.score(&obs, &mask, &a).unwrap();
                total += s.tape.val(s.logp).data[0].exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "total prob {total}");
    }
}
