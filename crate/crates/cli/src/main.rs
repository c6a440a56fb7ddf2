//! `alignlab` — experiment driver CLI.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for run failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alignlab_core::data::Dataset;
use alignlab_core::harness::{self, ExperimentConfig, ExperimentKind};
use alignlab_core::network::NetParams;
use alignlab_core::optim::load_checkpoint;
use alignlab_core::Error;

#[derive(Parser)]
#[command(name = "alignlab", version, about = "Two-layer network training lab")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Experiment configuration (JSON). Omitted fields take the scaled
    /// main-experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace the config's seed list with this single master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for sweeps (ALIGNLAB_WORKERS overrides).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write CSV + JSON exports.
    Gen,
    /// Train a single run; writes trajectory, checkpoint, final record.
    Train,
    /// Train/analyze over every (n, seed) pair of the config.
    Sweep,
    /// Warm-restart a checkpoint with a geometric learning-rate decay.
    Stability {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Measure sup-deviation of the origin gradient field over n.
    Concentration,
    /// Search and certify extremal directions.
    Extremal,
    /// Early-alignment probe at the theoretical alignment time.
    AlignProbe,
    /// Analyze saved parameters against a dataset JSON.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Render CSV outputs (sweep, concentration or histogram) as SVG.
    Plot {
        /// CSV files to render.
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<Error>().is_some_and(|e| {
                matches!(
                    e,
                    Error::InvalidSpec(_)
                        | Error::DimensionMismatch { .. }
                        | Error::Empty(_)
                        | Error::Json(_)
                        | Error::VersionMismatch { .. }
                )
            });
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(args: &GlobalArgs, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(Error::Json)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if matches!(
        kind,
        ExperimentKind::Single | ExperimentKind::Stability | ExperimentKind::AlignProbe
    ) && cfg.n_values.len() > 1
    {
        cfg.n_values.truncate(1);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out_dir = cli.global.out_dir.clone();
    match &cli.command {
        Command::Gen => {
            let cfg = load_config(&cli.global, ExperimentKind::Single)?;
            let (csv, json) = harness::run_gen(&cfg, &out_dir)?;
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Train => {
            let cfg = load_config(&cli.global, ExperimentKind::Single)?;
            let n = cfg.n_values[0];
            let seed = cfg.seeds[0];
            let run = harness::run_single(&cfg, n, seed, Some(&out_dir))?;
            if run.record.status != "ok" {
                anyhow::bail!("run failed: {}", run.record.status);
            }
            let outcome = run.outcome.expect("ok runs carry an outcome");
            let ckpt = alignlab_core::optim::Checkpoint::from_outcome(&outcome, &cfg.fingerprint());
            let ckpt_path = out_dir.join(format!("checkpoint_n{n}_seed{seed}.json"));
            alignlab_core::optim::save_checkpoint(&ckpt_path, &ckpt)?;
            std::fs::write(
                out_dir.join(format!("record_n{n}_seed{seed}.json")),
                serde_json::to_string_pretty(&run.record)?,
            )?;
            println!(
                "final train loss {:.6e} after {} steps; checkpoint at {}",
                outcome.final_loss,
                outcome.steps,
                ckpt_path.display()
            );
        }
        Command::Sweep => {
            let cfg = load_config(&cli.global, ExperimentKind::Sweep)?;
            let result = harness::run_sweep(&cfg, Some(&out_dir))?;
            let failed = result.runs.iter().filter(|r| r.record.status != "ok").count();
            println!(
                "{} runs ({} failed); wrote {}",
                result.runs.len(),
                failed,
                out_dir.join("sweep.csv").display()
            );
            if failed > 0 {
                anyhow::bail!("{failed} runs failed");
            }
        }
        Command::Stability { checkpoint } => {
            let cfg = load_config(&cli.global, ExperimentKind::Stability)?;
            let result = harness::run_stability(&cfg, checkpoint, Some(&out_dir))?;
            println!(
                "restart train MSE {:.6e}, final {:.6e} (relative change {:.3e}) after {} steps",
                result.restart_train_mse, result.final_train_mse, result.relative_change, result.steps
            );
        }
        Command::Concentration => {
            let cfg = load_config(&cli.global, ExperimentKind::Concentration)?;
            let result = harness::run_concentration(&cfg, Some(&out_dir))?;
            println!(
                "log-log slope {:.3} over {} rows; wrote {}",
                result.loglog_slope,
                result.rows.len(),
                out_dir.join("concentration.csv").display()
            );
        }
        Command::Extremal => {
            let cfg = load_config(&cli.global, ExperimentKind::Extremal)?;
            let result = harness::run_extremal(&cfg, Some(&out_dir))?;
            let certified = result
                .rows
                .iter()
                .filter(|r| r.verdict == alignlab_core::geometry::Verdict::Extremal)
                .count();
            println!(
                "{} candidates ({} certified extremal); wrote {}",
                result.rows.len(),
                certified,
                out_dir.join("extremal.jsonl").display()
            );
        }
        Command::AlignProbe => {
            let cfg = load_config(&cli.global, ExperimentKind::AlignProbe)?;
            let result = harness::run_align_probe(&cfg, Some(&out_dir))?;
            for (seed, min_cos) in &result.min_cos_by_seed {
                println!(
                    "seed {seed}: min cos to sign target {min_cos:.4} at step {} (tau = {:.3})",
                    result.steps, result.tau
                );
            }
        }
        Command::Analyze { checkpoint, dataset } => {
            let cfg = load_config(&cli.global, ExperimentKind::Single)?;
            let params = match load_checkpoint(checkpoint) {
                Ok(c) => c.params,
                // Accept a bare parameter export as well.
                Err(_) => NetParams::from_json(&std::fs::read_to_string(checkpoint)?)?,
            };
            let ds = Dataset::from_json(&std::fs::read_to_string(dataset)?)?;
            harness::run_analyze(&params, &ds, cfg.n_test, cfg.seeds[0], &out_dir)?;
            println!(
                "wrote {} and {}",
                out_dir.join("analysis.csv").display(),
                out_dir.join("cosine_hist.csv").display()
            );
        }
        Command::Plot { inputs } => {
            if inputs.is_empty() {
                return Err(Error::Empty("plot inputs").into());
            }
            let written = harness::svg::emit_plots(inputs, &out_dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
