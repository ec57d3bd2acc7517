//! Train a generative head on the two-moons toy set and score the samples.
//!
//! Runs the same driver as `bridgecast synth2d`: train, sample, compare
//! the generated cloud to held-out data with Wasserstein, sliced
//! Wasserstein, and MMD, and write all artifacts (config snapshot,
//! samples, reference, metrics, checkpoint) to a directory.
//!
//! Short budget, so distances land near but not at benchmark values.
//!
//!     cargo run --example synth2d_moons [head]
//!
//! where `head` is one of ddpm | sgm | fm | si (default fm).

use bridgecast::config::{
    DataSection, ExperimentKind, ModelSection, OutputSection, RunConfig, SolverSection,
    TrainSection,
};
use bridgecast::error::Result;
use bridgecast::generative::HeadKind;
use bridgecast::runner::cmd_synth2d;

fn main() -> Result<()> {
    let head = match std::env::args().nth(1).as_deref() {
        None | Some("fm") => HeadKind::Fm,
        Some("ddpm") => HeadKind::Ddpm,
        Some("sgm") => HeadKind::Sgm,
        Some("si") => HeadKind::Si,
        Some(other) => {
            eprintln!("unknown head {other:?}, expected ddpm | sgm | fm | si");
            std::process::exit(2);
        }
    };
    let out = std::env::temp_dir().join("bridgecast-synth2d-moons");
    let cfg = RunConfig {
        experiment: ExperimentKind::Synth2d,
        model: ModelSection { head, ..ModelSection::default() },
        train: TrainSection {
            iters: 1500,
            batch: 512,
            seed: 0,
            n_runs: 1,
            ..TrainSection::default()
        },
        solver: SolverSection::default(),
        data: DataSection {
            dataset: "moons".into(),
            n_train: 8000,
            n_eval: 2048,
            ..DataSection::default()
        },
        output: OutputSection { dir: out.to_string_lossy().into_owned() },
    };

    println!("training {} on two moons (1500 iters)...", cfg.model.identity());
    let art = cmd_synth2d(&cfg)?;
    for (name, entry) in art.metrics.iter() {
        println!("{name:>20}: {:.4}", entry.mean);
    }
    println!("artifacts in {}", art.dir.display());
    println!("rerun bit for bit with:");
    println!("  bridgecast synth2d --config {}/config.toml --out <dir>", art.dir.display());
    Ok(())
}
