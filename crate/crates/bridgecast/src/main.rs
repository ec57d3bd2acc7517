//! Thin command-line front end over [`bridgecast::runner`].
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/IO error,
//! 4 training or solver divergence. Errors print as a single line on
//! stderr. Log verbosity comes from `RUST_LOG` (default `warn`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bridgecast::config::{ExperimentKind, RunConfig};
use bridgecast::error::Result;
use bridgecast::metrics::MetricReport;
use bridgecast::runner;

#[derive(Parser)]
#[command(name = "bridgecast", version, about = "Generative time-series benchmarks and forecasting")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Run config (TOML); subcommand defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override of the artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override of the root training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a generative head on a named 2D benchmark and score samples
    /// against a held-out draw.
    Synth2d(RunArgs),
    /// Generate from a known AR process, train the forecaster on it, and
    /// score recovered AR coefficients on a long self-rollout.
    #[command(name = "ar-bench")]
    ArBench(RunArgs),
    /// Train on a CSV series and score probabilistic forecasts of the
    /// held-out horizon.
    Forecast(RunArgs),
    /// Draw samples from a saved checkpoint without retraining.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        /// Trained parameter checkpoint (JSON).
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score a samples CSV against a reference CSV.
    Eval {
        /// Generated point-cloud CSV.
        #[arg(long)]
        samples: PathBuf,
        /// Reference point-cloud CSV.
        #[arg(long)]
        reference: PathBuf,
        /// Directory for metrics.json.
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
        /// Projection seed of the sliced Wasserstein distance; pass the
        /// producing run's seed to reproduce its in-process value.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &RunArgs, kind: ExperimentKind) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => match kind {
            ExperimentKind::Synth2d => RunConfig::default(),
            ExperimentKind::ArBench => RunConfig::ar_bench_desk(),
            ExperimentKind::Forecast => {
                let mut c = RunConfig::default();
                c.experiment = ExperimentKind::Forecast;
                c
            }
        },
    };
    if let Some(out) = &args.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn print_report(report: &MetricReport) {
    for (name, entry) in report.iter() {
        match entry.std {
            Some(std) => println!("{name}: {} (std {std}, n={})", entry.mean, entry.runs),
            None => println!("{name}: {}", entry.mean),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth2d(args) => {
            let cfg = load_config(&args, ExperimentKind::Synth2d)?;
            let art = runner::cmd_synth2d(&cfg)?;
            println!("artifacts: {}", art.dir.display());
            print_report(&art.metrics);
        }
        Cmd::ArBench(args) => {
            let cfg = load_config(&args, ExperimentKind::ArBench)?;
            let art = runner::cmd_ar_bench(&cfg)?;
            println!("artifacts: {}", art.dir.display());
            print_report(&art.metrics);
        }
        Cmd::Forecast(args) => {
            let cfg = load_config(&args, ExperimentKind::Forecast)?;
            let art = runner::cmd_forecast(&cfg)?;
            println!("artifacts: {}", art.dir.display());
            print_report(&art.metrics);
        }
        Cmd::Sample { run, checkpoint } => {
            let cfg = load_config(&run, ExperimentKind::Synth2d)?;
            let out = runner::cmd_sample(&cfg, &checkpoint)?;
            println!("samples: {}", out.display());
        }
        Cmd::Eval {
            samples,
            reference,
            out,
            seed,
        } => {
            let report = runner::cmd_eval(&samples, &reference, &out, seed)?;
            println!("metrics: {}", out.join("metrics.json").display());
            print_report(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
