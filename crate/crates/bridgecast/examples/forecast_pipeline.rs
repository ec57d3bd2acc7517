//! End-to-end probabilistic forecast on a CSV series.
//!
//! Simulates an AR(1) series, writes it as CSV, then runs the `forecast`
//! driver: scale, window, train a conditional interpolant head, sample
//! forecast paths over the held-out horizon, and score them with
//! normalized CRPS, ND, and NRMSE on the dimension-summed series.
//! The quantile fan is written as CSV next to the metrics.
//!
//!     cargo run --example forecast_pipeline

use bridgecast::config::{
    DataSection, ExperimentKind, ModelSection, OutputSection, RunConfig, SolverSection,
    TrainSection,
};
use bridgecast::data::{gen_ar, write_csv, ArSpec};
use bridgecast::error::Result;
use bridgecast::generative::HeadKind;
use bridgecast::runner::cmd_forecast;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("bridgecast-forecast");
    std::fs::create_dir_all(&dir).map_err(|e| bridgecast::error::Error::io(&dir, e))?;
    let csv = dir.join("series.csv");
    let series = gen_ar(&ArSpec::new(vec![0.8], 1.0, 600, 3)?)?;
    write_csv(&series, &csv)?;
    println!("wrote {} rows to {}", 600, csv.display());

    let cfg = RunConfig {
        experiment: ExperimentKind::Forecast,
        model: ModelSection {
            head: HeadKind::Si,
            hidden: 32,
            encoder_hidden: 16,
            ..ModelSection::default()
        },
        train: TrainSection { iters: 2000, batch: 256, n_runs: 1, ..TrainSection::default() },
        solver: SolverSection { steps: 50, ..SolverSection::default() },
        data: DataSection {
            path: csv.to_string_lossy().into_owned(),
            context_len: 2,
            horizon: 8,
            n_paths: 100,
            ..DataSection::default()
        },
        output: OutputSection { dir: dir.join("run").to_string_lossy().into_owned() },
    };

    println!("training {} and sampling 100 paths over an 8-step horizon...", cfg.model.identity());
    let art = cmd_forecast(&cfg)?;
    for name in ["crps_sum", "nd_sum", "nrmse_sum"] {
        println!("{name:>10}: {:.4}", art.metrics.get(name).expect(name).mean);
    }
    println!("quantile fan: {}", art.dir.join("quantiles_run0.csv").display());
    println!("paths:        {}", art.dir.join("samples_run0.csv").display());
    Ok(())
}
