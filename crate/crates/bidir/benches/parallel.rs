//! Compares the data-parallel reduction path against the always-serial
//! reference on the two hot workloads: batched episode gradients and trace
//! generation. Build with `--no-default-features` to time the serial
//! fallback of the default entry points themselves.

use bidir::dsl::Domain;
use bidir::nn::GradStore;
use bidir::policy::NeuralPolicy;
use bidir::tracegen::{gen_dataset, stream_rng, TraceGenConfig};
use bidir::trainer::{rollout, sample_tasks};
use bidir::env::{EnvConfig, SynthEnv};
use criterion::{criterion_group, criterion_main, Criterion};

/// One episode's REINFORCE gradient for task `i`, accumulated into `acc`.
fn episode_grad(policy: &NeuralPolicy, tasks: &[bidir::Task], i: usize, acc: &mut [f64]) {
    let mut rng = stream_rng(17, i as u64);
    let mut cfg = EnvConfig::new(Domain::Arith24);
    cfg.max_steps = 6;
    let Ok(mut env) = SynthEnv::new(tasks[i].clone(), cfg) else { return };
    let (steps, total, _) = rollout(policy, &mut env, &mut rng);
    let mut g = GradStore::zeros_like(&policy.params);
    for (obs, mask, action, _) in &steps {
        policy.accumulate_step_grad(obs, mask, action, total, 0.0, &mut g);
    }
    for (a, v) in acc.iter_mut().zip(g.to_flat()) {
        *a += v;
    }
}

fn bench_batch_gradients(c: &mut Criterion) {
    let policy = NeuralPolicy::new(Domain::Arith24, 0);
    let tasks = sample_tasks(Domain::Arith24, 3, 16, 3);
    let width = policy.params.num_scalars();
    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            bidir::par::sum_indexed(tasks.len(), width, |i, acc| {
                episode_grad(&policy, &tasks, i, acc)
            })
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let mut acc = vec![0.0; width];
            for i in 0..tasks.len() {
                episode_grad(&policy, &tasks, i, &mut acc);
            }
            acc
        })
    });
    group.finish();
}

fn bench_trace_generation(c: &mut Criterion) {
    let cfg = TraceGenConfig { domain: Domain::Arith24, depth: 3, p_invert: 0.5, seed: 5 };
    let mut group = c.benchmark_group("trace_generation");
    group.sample_size(10);
    // gen_dataset uses the feature-selected path (rayon by default)
    group.bench_function("default_path", |b| b.iter(|| gen_dataset(&cfg, 32)));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            bidir::par::map_indexed_seq(32, |i| {
                let mut rng = stream_rng(cfg.seed, i as u64);
                loop {
                    let Some((task, prog)) =
                        bidir::tracegen::gen_random_task(cfg.domain, cfg.depth, &mut rng)
                    else {
                        continue;
                    };
                    if let Some(tr) = bidir::tracegen::program_to_trace(
                        &task,
                        &prog,
                        cfg.domain,
                        cfg.p_invert,
                        &mut rng,
                    ) {
                        return tr;
                    }
                }
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_batch_gradients, bench_trace_generation);
criterion_main!(benches);
