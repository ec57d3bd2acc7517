//! Closed-loop sanity check: can a head re-generate an AR(1) process?
//!
//! Runs the `ar-bench` driver: simulate an AR(1) series, train a
//! conditional head on one-step transitions, roll the model out in closed
//! loop feeding its own samples back, then refit an AR(1) to the rollout
//! and compare the fitted coefficient against the true one.
//!
//!     cargo run --example ar_recovery [head]
//!
//! where `head` is one of ddpm | sgm | fm | si (default si).

use bridgecast::config::RunConfig;
use bridgecast::error::Result;
use bridgecast::generative::HeadKind;
use bridgecast::runner::cmd_ar_bench;

fn main() -> Result<()> {
    let head = match std::env::args().nth(1).as_deref() {
        None | Some("si") => HeadKind::Si,
        Some("ddpm") => HeadKind::Ddpm,
        Some("sgm") => HeadKind::Sgm,
        Some("fm") => HeadKind::Fm,
        Some(other) => {
            eprintln!("unknown head {other:?}, expected ddpm | sgm | fm | si");
            std::process::exit(2);
        }
    };

    // The desk preset pins the benchmark shape (short context, 10k iters);
    // trim the budget so the example finishes in under a minute.
    let mut cfg = RunConfig::ar_bench_desk();
    cfg.model.head = head;
    cfg.train.iters = 4000;
    cfg.train.n_runs = 1;
    cfg.output.dir = std::env::temp_dir()
        .join("bridgecast-ar-recovery")
        .to_string_lossy()
        .into_owned();

    println!(
        "true process: x[t+1] = {} x[t] + {} eps,  len {}",
        cfg.data.ar_coeffs[0], cfg.data.ar_sigma, cfg.data.ar_len
    );
    println!("training {} and rolling out {} steps...", cfg.model.identity(), cfg.data.ar_rollout);
    let art = cmd_ar_bench(&cfg)?;
    let phi = art.metrics.get("fitted_phi1").expect("fitted_phi1").mean;
    let err = art.metrics.get("ar_param_error").expect("ar_param_error").mean;
    println!("refit coefficient from the rollout: {phi:.4}");
    println!("absolute coefficient error:         {err:.4}");
    println!("artifacts in {}", art.dir.display());
    Ok(())
}
