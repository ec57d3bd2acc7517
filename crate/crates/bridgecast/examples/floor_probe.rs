use std::time::Instant;

use bridgecast::data::gen_2d;
use bridgecast::metrics::{mmd_biased, sliced_wasserstein, wasserstein, MmdKernel};

fn main() {
    for name in ["moons", "8gaussians"] {
        for n in [512usize, 1024, 2048, 4096] {
            let a = gen_2d(name, n, 11).unwrap();
            let b = gen_2d(name, n, 97).unwrap();
            let t0 = Instant::now();
            let w = wasserstein(&a, &b).unwrap();
            let wt = t0.elapsed().as_secs_f64();
            let swd = sliced_wasserstein(&a, &b, 128, 5).unwrap();
            let t1 = Instant::now();
            let rbf = mmd_biased(&a, &b, MmdKernel::Rbf).unwrap();
            let mt = t1.elapsed().as_secs_f64();
            println!(
                "{name} n={n}: W floor {w:.4} ({wt:.1}s)  swd {swd:.4}  mmd_rbf {rbf:.5} ({mt:.1}s)"
            );
        }
    }
}
