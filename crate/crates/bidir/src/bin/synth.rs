//! Command-line entry point: solve task files, train policies, run benchmark
//! sweeps, and generate trace datasets.

use anyhow::{bail, Context, Result};
use bidir::dsl::Domain;
use bidir::env::EnvConfig;
use bidir::harness::{
    self, export_manifest, export_results, gen_symmetry_suite, load_tasks, run_benchmark,
    RunManifest,
};
use bidir::policy::{NeuralPolicy, Policy, RandomPolicy, ScriptedPolicy};
use bidir::tracegen::{self, TraceGenConfig};
use bidir::trainer::{self, TrainConfig};
use bidir::values::Task;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "synth", about = "Bidirectional execution-guided program synthesis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Random,
    Oracle,
    Neural,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMode {
    Supervised,
    Reinforce,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMode {
    Bidir,
    Fwd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve tasks from a file or directory and report results.
    Solve {
        #[arg(long)]
        domain: Domain,
        /// ARC .json file/directory, or a .jsonl of native tasks.
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, value_enum, default_value = "random")]
        policy: PolicyKind,
        /// Policy checkpoint (required for --policy neural).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-task wall-clock budget in seconds.
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
        /// Disable inverse and conditional-inverse operations.
        #[arg(long)]
        forward_only: bool,
        /// Episode attempts per task (each stops early on solve/timeout).
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 15)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the results CSV (defaults to stdout summary only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a neural policy and save a checkpoint.
    Train {
        #[arg(long, value_enum)]
        mode: TrainMode,
        #[arg(long)]
        domain: Domain,
        /// Program-size budget for generated tasks/traces.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Existing trace dataset for supervised mode (otherwise generated).
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Traces to generate when --traces is not given.
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.01)]
        entropy_weight: f64,
        /// Warm-start from an existing checkpoint.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        max_steps: usize,
        #[arg(long, default_value_t = 0.5)]
        p_invert: f64,
        /// Train against forward-only episodes (REINFORCE mode).
        #[arg(long)]
        forward_only: bool,
    },
    /// Benchmark a domain in bidirectional or forward-only mode.
    Bench {
        domain: Domain,
        #[arg(long, value_enum, default_value = "bidir")]
        mode: BenchMode,
        /// Output directory for results.csv and manifest.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "random")]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        tasks: usize,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 15)]
        max_steps: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a validated trace dataset (JSON lines).
    GenTraces {
        #[arg(long)]
        domain: Domain,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Per-branch probability of backward expansion.
        #[arg(long, default_value_t = 0.5)]
        p_invert: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn policy_factory(
    kind: PolicyKind,
    domain: Domain,
    checkpoint: Option<&PathBuf>,
    tasks: &[Task],
) -> Result<Box<dyn Fn(usize) -> Box<dyn Policy> + Sync>> {
    match kind {
        PolicyKind::Random => Ok(Box::new(|_| Box::new(RandomPolicy))),
        PolicyKind::Neural => {
            let path = checkpoint.context("--policy neural requires --checkpoint")?;
            let policy = harness::load_checkpoint(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            if policy.domain != domain {
                bail!("checkpoint is for domain {}, not {}", policy.domain, domain);
            }
            Ok(Box::new(move |_| Box::new(policy.clone())))
        }
        PolicyKind::Oracle => {
            // precompute a ground-truth trace per task
            let scripts: Vec<Option<ScriptedPolicy>> = tasks
                .iter()
                .map(|task| {
                    let program = harness::oracle_program(domain, task)?;
                    let mut rng = tracegen::stream_rng(0x07ac1e, 0);
                    let record =
                        tracegen::program_to_trace(task, &program, domain, 0.5, &mut rng)?;
                    Some(ScriptedPolicy::new(record.actions))
                })
                .collect();
            Ok(Box::new(move |ti| match &scripts[ti] {
                Some(s) => Box::new(s.clone()),
                None => Box::new(ScriptedPolicy::new(vec![])),
            }))
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Solve {
            domain,
            tasks,
            policy,
            checkpoint,
            timeout,
            forward_only,
            episodes,
            max_steps,
            seed,
            out,
        } => {
            let task_list = load_tasks(&tasks)
                .with_context(|| format!("loading tasks from {}", tasks.display()))?;
            let mut cfg = EnvConfig::new(domain);
            cfg.forward_only = forward_only;
            cfg.max_steps = max_steps;
            let factory = policy_factory(policy, domain, checkpoint.as_ref(), &task_list)?;
            let rows = run_benchmark_with(
                &task_list,
                &factory,
                cfg,
                episodes,
                Some(Duration::from_secs_f64(timeout)),
                seed,
            );
            let rate = harness::solve_rate(&rows);
            for r in &rows {
                println!(
                    "{}\t{}\t{}",
                    r.task_id,
                    if r.solved { "solved" } else { "unsolved" },
                    r.program
                );
            }
            println!("solved {}/{} ({:.1}%)", rows.iter().filter(|r| r.solved).count(),
                rows.len(), rate * 100.0);
            if let Some(path) = out {
                export_results(&path, &rows)?;
            }
        }
        Cmd::Train {
            mode,
            domain,
            depth,
            epochs,
            batch,
            seed,
            out,
            traces,
            count,
            lr,
            entropy_weight,
            init,
            max_steps,
            p_invert,
            forward_only,
        } => {
            let mut policy = match init {
                Some(path) => {
                    let p = harness::load_checkpoint(&path)?;
                    if p.domain != domain {
                        bail!("init checkpoint is for domain {}", p.domain);
                    }
                    p
                }
                None => NeuralPolicy::new(domain, seed),
            };
            let mut cfg = TrainConfig::new(domain);
            cfg.epochs = epochs;
            cfg.batch = batch;
            cfg.seed = seed;
            cfg.lr = lr;
            cfg.entropy_weight = entropy_weight;
            cfg.depth = depth;
            cfg.max_steps = max_steps;
            cfg.forward_only = forward_only;
            let report = match mode {
                TrainMode::Supervised => {
                    let records = match traces {
                        Some(path) => tracegen::read_jsonl(&path)?,
                        None => tracegen::gen_dataset(
                            &TraceGenConfig { domain, depth, p_invert, seed },
                            count,
                        ),
                    };
                    trainer::supervised_train(&mut policy, &records, &cfg, None)
                }
                TrainMode::Reinforce => trainer::reinforce_finetune(&mut policy, &cfg),
            };
            harness::save_checkpoint(&out, &policy)?;
            let report_path = out.with_extension("report.json");
            std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
            for e in &report.epochs {
                println!(
                    "epoch {}\tloss {:.4}\treturn {:.3}\tsolve_rate {:.3}",
                    e.epoch, e.loss, e.mean_return, e.solve_rate
                );
            }
            println!("checkpoint written to {}", out.display());
        }
        Cmd::Bench {
            domain,
            mode,
            out,
            policy,
            checkpoint,
            tasks,
            episodes,
            max_steps,
            depth,
            seed,
        } => {
            let task_list: Vec<Task> = match domain {
                Domain::GridSym => {
                    let per = tasks.div_ceil(harness::SYMMETRY_TEMPLATES.len()).max(1);
                    gen_symmetry_suite(per, seed).into_iter().map(|(t, _)| t).collect()
                }
                _ => trainer::sample_tasks(domain, depth, tasks, seed),
            };
            let mut cfg = EnvConfig::new(domain);
            cfg.forward_only = matches!(mode, BenchMode::Fwd);
            cfg.max_steps = max_steps;
            let factory = policy_factory(policy, domain, checkpoint.as_ref(), &task_list)?;
            let rows =
                run_benchmark_with(&task_list, &factory, cfg, episodes, None, seed);
            std::fs::create_dir_all(&out)?;
            export_results(&out.join("results.csv"), &rows)?;
            let manifest = RunManifest {
                domain,
                mode: if cfg.forward_only { "fwd".into() } else { "bidir".into() },
                policy: rows.first().map(|r| r.policy.clone()).unwrap_or_default(),
                seed,
                episodes_per_task: episodes,
                max_steps,
                num_tasks: rows.len(),
                num_solved: rows.iter().filter(|r| r.solved).count(),
                solve_rate: harness::solve_rate(&rows),
            };
            export_manifest(&out.join("manifest.json"), &manifest)?;
            println!(
                "{} {} solve rate {:.3} over {} tasks -> {}",
                manifest.domain,
                manifest.mode,
                manifest.solve_rate,
                manifest.num_tasks,
                out.display()
            );
        }
        Cmd::GenTraces { domain, count, p_invert, out, depth, seed } => {
            let cfg = TraceGenConfig { domain, depth, p_invert, seed };
            let records = tracegen::gen_dataset(&cfg, count);
            tracegen::write_jsonl(&out, &records)?;
            println!("{} traces written to {}", records.len(), out.display());
        }
    }
    Ok(())
}

/// Adapter: `run_benchmark` takes a task-independent factory; the oracle
/// needs the task index, so thread it through here.
fn run_benchmark_with(
    tasks: &[Task],
    factory: &(dyn Fn(usize) -> Box<dyn Policy> + Sync),
    cfg: EnvConfig,
    episodes: usize,
    timeout: Option<Duration>,
    seed: u64,
) -> Vec<harness::ResultRow> {
    // run per task so each gets its own (possibly task-specific) policy
    tasks
        .iter()
        .enumerate()
        .flat_map(|(ti, task)| {
            run_benchmark(
                std::slice::from_ref(task),
                &|| factory(ti),
                cfg,
                episodes,
                timeout,
                seed ^ ((ti as u64) << 7),
            )
        })
        .collect()
}
