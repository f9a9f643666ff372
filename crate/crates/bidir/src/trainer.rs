//! Training loops: supervised pretraining on generated traces (negative
//! log-likelihood of the oracle action at each step) and REINFORCE
//! fine-tuning with a running-mean baseline and an entropy bonus. Per-item
//! gradients are computed independently and reduced deterministically, so
//! parallel and sequential runs produce identical parameters.

use crate::dsl::Domain;
use crate::env::{Action, ActionMask, EnvConfig, Observation, SynthEnv};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::GradStore;
use crate::policy::NeuralPolicy;
use crate::tracegen::{gen_random_task, stream_rng, TraceRecord};
use crate::values::Task;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub domain: Domain,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub lr: f64,
    pub entropy_weight: f64,
    /// Program-size budget for generated tasks (REINFORCE and evaluation).
    pub depth: usize,
    pub max_steps: usize,
    pub forward_only: bool,
    /// Momentum of the running-mean return baseline.
    pub baseline_momentum: f64,
}

impl TrainConfig {
    pub fn new(domain: Domain) -> Self {
        TrainConfig {
            domain,
            epochs: 10,
            batch: 32,
            seed: 0,
            lr: 1e-3,
            entropy_weight: 0.01,
            depth: 3,
            max_steps: 15,
            forward_only: false,
            baseline_momentum: 0.9,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        let mut cfg = EnvConfig::new(self.domain);
        cfg.max_steps = self.max_steps;
        cfg.forward_only = self.forward_only;
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-step NLL (supervised) or mean episode return (REINFORCE).
    pub loss: f64,
    pub mean_return: f64,
    pub solve_rate: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map(|e| e.loss).unwrap_or(f64::NAN)
    }

    pub fn final_solve_rate(&self) -> f64 {
        self.epochs.last().map(|e| e.solve_rate).unwrap_or(0.0)
    }
}

/// Replay a trace and collect (observation, mask, action) triples.
fn trace_steps(record: &TraceRecord) -> Option<Vec<(Observation, ActionMask, Action)>> {
    let mut cfg = EnvConfig::new(record.domain);
    cfg.max_steps = record.actions.len().max(1);
    let mut env = SynthEnv::new(record.task.clone(), cfg).ok()?;
    env.reset();
    let mut out = Vec::with_capacity(record.actions.len());
    for action in &record.actions {
        if env.done() {
            return None;
        }
        let obs = env.observe();
        let mask = env.valid_action_mask();
        if !mask.permits(action) {
            return None;
        }
        out.push((obs, mask, action.clone()));
        env.step(action);
    }
    env.solution()?;
    Some(out)
}

/// Supervised pretraining: minimize the NLL of every trace action. Returns
/// per-epoch mean NLL; `eval_tasks`, when given, also tracks solve rate.
pub fn supervised_train(
    policy: &mut NeuralPolicy,
    traces: &[TraceRecord],
    cfg: &TrainConfig,
    eval_tasks: Option<&[Task]>,
) -> TrainReport {
    let steps: Vec<Vec<(Observation, ActionMask, Action)>> = traces
        .iter()
        .map(|t| trace_steps(t).expect("trace does not replay"))
        .collect();
    let width = policy.params.num_scalars();
    let mut adam = Adam::new(&policy.params, AdamConfig { lr: cfg.lr, ..Default::default() });
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let mut total_nll = 0.0;
        let mut total_steps = 0usize;
        for batch in steps.chunks(cfg.batch.max(1)) {
            let n_steps: usize = batch.iter().map(|s| s.len()).sum();
            // loss = sum of per-step NLL / number of steps in the batch
            let flat = crate::par::sum_indexed(batch.len(), width + 1, |i, acc| {
                let mut g = GradStore::zeros_like(&policy.params);
                let mut nll = 0.0;
                for (obs, mask, action) in &batch[i] {
                    let (logp, _) = policy
                        .accumulate_step_grad(
                            obs,
                            mask,
                            action,
                            1.0 / n_steps as f64,
                            0.0,
                            &mut g,
                        )
                        .expect("scored trace action");
                    nll -= logp;
                }
                let gf = g.to_flat();
                for (a, v) in acc[..width].iter_mut().zip(gf) {
                    *a += v;
                }
                acc[width] += nll;
            });
            let mut grads = GradStore::zeros_like(&policy.params);
            grads.add_flat(&flat[..width]);
            adam.step(&mut policy.params, &grads);
            total_nll += flat[width];
            total_steps += n_steps;
        }
        let loss = total_nll / total_steps.max(1) as f64;
        let solve_rate = match eval_tasks {
            Some(tasks) => evaluate_solve_rate(policy, tasks, &cfg.env_config(), cfg.seed ^ 0x5eed),
            None => 0.0,
        };
        report.epochs.push(EpochStats { epoch, loss, mean_return: 0.0, solve_rate });
    }
    report
}

/// One sampled episode; returns recorded steps, total reward, and solved flag.
pub fn rollout(
    policy: &NeuralPolicy,
    env: &mut SynthEnv,
    rng: &mut ChaCha8Rng,
) -> (Vec<(Observation, ActionMask, Action, f64)>, f64, bool) {
    let mut steps = Vec::new();
    let mut total = 0.0;
    env.reset();
    while !env.done() {
        let obs = env.observe();
        let mask = env.valid_action_mask();
        let Some((action, _)) = policy.sample(&obs, &mask, rng) else { break };
        let (_, reward, _, _) = env.step(&action);
        steps.push((obs, mask, action, reward));
        total += reward;
    }
    (steps, total, env.solution().is_some())
}

/// REINFORCE fine-tuning on freshly sampled tasks. The objective per step is
/// `-(G_t - baseline) * log pi(a|s) - beta * H`, averaged over the batch.
pub fn reinforce_finetune(policy: &mut NeuralPolicy, cfg: &TrainConfig) -> TrainReport {
    let width = policy.params.num_scalars();
    let env_cfg = cfg.env_config();
    let mut adam = Adam::new(&policy.params, AdamConfig { lr: cfg.lr, ..Default::default() });
    let mut baseline = 0.0;
    let mut baseline_ready = false;
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let b = if baseline_ready { baseline } else { 0.0 };
        // +2 extra accumulator lanes: total return, solved count
        let flat = crate::par::sum_indexed(cfg.batch, width + 2, |i, acc| {
            let mut rng = stream_rng(cfg.seed ^ 0x4e11_f0cc, (epoch * cfg.batch + i) as u64);
            let (task, _) = loop {
                if let Some(tp) = gen_random_task(cfg.domain, cfg.depth, &mut rng) {
                    break tp;
                }
            };
            let Ok(mut env) = SynthEnv::new(task, env_cfg) else { return };
            let (steps, total, solved) = rollout(policy, &mut env, &mut rng);
            let mut g = GradStore::zeros_like(&policy.params);
            let mut future = total;
            for (obs, mask, action, reward) in &steps {
                let advantage = future - b;
                policy
                    .accumulate_step_grad(
                        obs,
                        mask,
                        action,
                        advantage / cfg.batch as f64,
                        cfg.entropy_weight / cfg.batch as f64,
                        &mut g,
                    )
                    .expect("scored sampled action");
                future -= reward;
            }
            let gf = g.to_flat();
            for (a, v) in acc[..width].iter_mut().zip(gf) {
                *a += v;
            }
            acc[width] += total;
            acc[width + 1] += solved as u8 as f64;
        });
        let mut grads = GradStore::zeros_like(&policy.params);
        grads.add_flat(&flat[..width]);
        adam.step(&mut policy.params, &grads);
        let mean_return = flat[width] / cfg.batch as f64;
        let solve_rate = flat[width + 1] / cfg.batch as f64;
        if baseline_ready {
            baseline = cfg.baseline_momentum * baseline
                + (1.0 - cfg.baseline_momentum) * mean_return;
        } else {
            baseline = mean_return;
            baseline_ready = true;
        }
        report.epochs.push(EpochStats {
            epoch,
            loss: -mean_return,
            mean_return,
            solve_rate,
        });
    }
    report
}

/// Fraction of tasks solved, one sampled episode per task.
pub fn evaluate_solve_rate(
    policy: &NeuralPolicy,
    tasks: &[Task],
    env_cfg: &EnvConfig,
    seed: u64,
) -> f64 {
    let solved: Vec<bool> = crate::par::map_indexed(tasks.len(), |i| {
        let mut rng = stream_rng(seed, i as u64);
        let Ok(mut env) = SynthEnv::new(tasks[i].clone(), *env_cfg) else { return false };
        let (_, _, solved) = rollout(policy, &mut env, &mut rng);
        solved
    });
    solved.iter().filter(|&&s| s).count() as f64 / tasks.len().max(1) as f64
}

/// Sample `count` distinct evaluation tasks from the generator stream.
pub fn sample_tasks(domain: Domain, depth: usize, count: usize, seed: u64) -> Vec<Task> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed ^ 0xe7a1, i as u64);
            loop {
                if let Some((task, _)) = gen_random_task(domain, depth, &mut rng) {
                    return task;
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracegen::{gen_dataset, TraceGenConfig};

    #[test]
    fn supervised_training_reduces_nll() {
        let gen = TraceGenConfig { domain: Domain::DoubleAdd, depth: 4, p_invert: 0.5, seed: 7 };
        let traces = gen_dataset(&gen, 24);
        let mut policy = NeuralPolicy::new(Domain::DoubleAdd, 1);
        let mut cfg = TrainConfig::new(Domain::DoubleAdd);
        cfg.epochs = 8;
        cfg.batch = 8;
        cfg.lr = 3e-3;
        let report = supervised_train(&mut policy, &traces, &cfg, None);
        let first = report.epochs.first().unwrap().loss;
        let last = report.final_loss();
        assert!(last < first * 0.8, "NLL {first} -> {last} did not drop");
        assert!(policy.params.all_finite());
    }

    #[test]
    fn reinforce_improves_mean_return() {
        let mut policy = NeuralPolicy::new(Domain::DoubleAdd, 2);
        let mut cfg = TrainConfig::new(Domain::DoubleAdd);
        cfg.domain = Domain::DoubleAdd;
        cfg.epochs = 12;
        cfg.batch = 16;
        cfg.depth = 3;
        cfg.max_steps = 8;
        cfg.lr = 3e-3;
        let report = reinforce_finetune(&mut policy, &cfg);
        let first3: f64 =
            report.epochs[..3].iter().map(|e| e.mean_return).sum::<f64>() / 3.0;
        let last3: f64 = report.epochs[report.epochs.len() - 3..]
            .iter()
            .map(|e| e.mean_return)
            .sum::<f64>()
            / 3.0;
        assert!(
            last3 > first3,
            "mean return did not improve: {first3} -> {last3}"
        );
        assert!(policy.params.all_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let gen = TraceGenConfig { domain: Domain::Arith24, depth: 3, p_invert: 0.5, seed: 5 };
        let traces = gen_dataset(&gen, 8);
        let run = || {
            let mut policy = NeuralPolicy::new(Domain::Arith24, 3);
            let mut cfg = TrainConfig::new(Domain::Arith24);
            cfg.epochs = 2;
            cfg.batch = 4;
            supervised_train(&mut policy, &traces, &cfg, None);
            policy.params.to_flat()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn evaluate_solve_rate_bounds() {
        let policy = NeuralPolicy::new(Domain::Arith24, 4);
        let tasks = sample_tasks(Domain::Arith24, 3, 10, 42);
        assert_eq!(tasks.len(), 10);
        let r = evaluate_solve_rate(&policy, &tasks, &EnvConfig::new(Domain::Arith24), 1);
        assert!((0.0..=1.0).contains(&r));
    }
}
