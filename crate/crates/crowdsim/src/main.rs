//! Thin CLI over the simulator library: run one configured experiment, run a
//! sweep matrix, replay a persisted event log, or re-aggregate reports from
//! event logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowdsim::config::RunConfig;
use crowdsim::engine::{run_experiment, Algorithm};
use crowdsim::report;
use crowdsim::sweep::{RunSummary, SweepSpec};
use crowdsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "crowdsim",
    about = "Deterministic discrete-event simulator for low-latency crowd labeling",
    version
)]
struct Cli {
    /// Override the run (or sweep) seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and event logs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Command-line overrides for the core config keys.
#[derive(Args)]
struct Overrides {
    /// Retainer pool size.
    #[arg(long = "N_p", value_name = "N")]
    n_p: Option<usize>,
    /// Records grouped into one task.
    #[arg(long = "N_g", value_name = "N")]
    n_g: Option<u32>,
    /// Pool-to-batch ratio.
    #[arg(long = "R", value_name = "RATIO")]
    ratio: Option<f64>,
    /// Per-label maintenance threshold in seconds; `inf` disables it.
    #[arg(long = "PM_ell", value_name = "SECONDS")]
    pm_ell: Option<f64>,
    /// Straggler mitigation on/off.
    #[arg(long = "SM", value_name = "BOOL")]
    sm: Option<bool>,
    /// Learning algorithm: AL, PL, HL, or NL.
    #[arg(long = "Alg", value_name = "ALG")]
    alg: Option<String>,
    /// Answers required per task.
    #[arg(long, value_name = "N")]
    votes_required: Option<u32>,
    /// Active fraction of each round under HL.
    #[arg(long, value_name = "FRAC")]
    r: Option<f64>,
    /// Apply a built-in baseline preset: base-nr or base-r.
    #[arg(long, value_name = "NAME")]
    baseline: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(n_p) = self.n_p {
            cfg.pool.n_p = n_p;
        }
        if let Some(n_g) = self.n_g {
            cfg.batch.n_g = n_g;
        }
        if let Some(ratio) = self.ratio {
            cfg.batch.r = ratio;
        }
        if let Some(pm_ell) = self.pm_ell {
            cfg.pool.pm_ell = pm_ell;
        }
        if let Some(sm) = self.sm {
            cfg.batch.sm = sm;
        }
        if let Some(alg) = &self.alg {
            cfg.learning.alg = match alg.as_str() {
                "AL" => Algorithm::AL,
                "PL" => Algorithm::PL,
                "HL" => Algorithm::HL,
                "NL" => Algorithm::NL,
                other => {
                    return Err(Error::config(
                        "Alg",
                        format!("unknown algorithm {other:?} (expected AL, PL, HL, or NL)"),
                    ));
                }
            };
        }
        if let Some(votes) = self.votes_required {
            cfg.batch.votes_required = votes;
        }
        if let Some(r) = self.r {
            cfg.learning.r = r;
        }
        if let Some(baseline) = &self.baseline {
            cfg.baseline = Some(baseline.clone());
            cfg.apply_baseline()?;
        }
        cfg.validate()
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one experiment from a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Execute a sweep (base config + axes) from a TOML spec.
    Sweep { spec: PathBuf },
    /// Recompute metrics from a persisted event log.
    Replay { log: PathBuf },
    /// Re-aggregate reports from the event logs under a run or sweep directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = serde_json::json!({ "error": err.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, overrides } => {
            let mut cfg = RunConfig::from_path(&config)?;
            overrides.apply(&mut cfg)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let population = cfg.build_population()?;
            let dataset = cfg.build_dataset()?;
            let output = run_experiment(&cfg.to_params(), &population, dataset.as_ref())?;
            report::emit_run(&output, cfg.budget.accuracy_target, &cli.out_dir)?;
            let summary = RunSummary::from_metrics(&output.metrics, cfg.budget.accuracy_target);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Cmd::Sweep { spec } => {
            let mut spec = SweepSpec::from_path(&spec)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let sweep_report = report::emit_sweep(&spec, &cli.out_dir)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&sweep_report.aggregates)?
            );
            Ok(())
        }
        Cmd::Replay { log } => {
            let (_, metrics) = report::replay_log(&log)?;
            println!("{}", metrics.to_json());
            Ok(())
        }
        Cmd::Report { dir } => {
            let written = report::reaggregate(&dir, &cli.out_dir)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
