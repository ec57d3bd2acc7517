//! Print the interpolant schedules and the discrete/continuous noising
//! curves the heads are built on.
//!
//! For each (interpolation, latent-scale) pair this tabulates alpha, beta,
//! gamma and their derivatives over time; then shows the discrete ladder
//! signal levels and the continuous-noising mean coefficient.
//!
//!     cargo run --example interpolant_schedules

use bridgecast::error::Result;
use bridgecast::schedules::{
    DdpmKind, DdpmSchedule, GammaKind, InterpKind, InterpolantSchedule, VpSde,
};

fn main() -> Result<()> {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();

    for interp in [InterpKind::Linear, InterpKind::Trig] {
        for gamma in [GammaKind::Sqrt, GammaKind::Quad, GammaKind::Trig] {
            let sched = InterpolantSchedule::new(interp, gamma);
            println!("\ninterpolant ({interp:?}, {gamma:?})");
            println!("{:>5} {:>8} {:>8} {:>8} {:>9} {:>9}", "s", "alpha", "beta", "gamma", "d_alpha", "d_gamma");
            for &s in &grid {
                let e = sched.eval(s)?;
                println!(
                    "{s:>5.2} {:>8.4} {:>8.4} {:>8.4} {:>9.4} {:>9.4}",
                    e.alpha, e.beta, e.gamma, e.d_alpha, e.d_gamma
                );
            }
        }
    }

    println!("\ndiscrete ladders (100 levels), signal level alpha_bar at checkpoints");
    println!("{:>8} {:>10} {:>10}", "level", "linear", "cosine");
    let lin = DdpmSchedule::new(DdpmKind::Linear, 100)?;
    let cos = DdpmSchedule::new(DdpmKind::Cosine, 100)?;
    for n in [1usize, 25, 50, 75, 100] {
        println!("{n:>8} {:>10.4} {:>10.4}", lin.alpha_bar(n), cos.alpha_bar(n));
    }

    println!("\ncontinuous noising (variance preserving), mean coefficient");
    let vp = VpSde::new(0.1, 20.0)?;
    println!("{:>5} {:>12} {:>10}", "s", "mean_coeff", "var");
    for &s in &grid {
        println!("{s:>5.2} {:>12.5} {:>10.5}", vp.mean_coeff(s), vp.var(s));
    }
    Ok(())
}
