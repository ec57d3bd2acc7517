//! Deterministic random-number plumbing.
//!
//! Every stochastic component takes an explicit u64 seed and derives its
//! generator here, so a run is reproducible bit for bit from its config
//! snapshot. Independent units of work (sample paths, benchmark repeats)
//! use distinct ChaCha streams of the same seed: permuting stream ids
//! permutes results without otherwise changing them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Tensor;

/// Root generator for a run.
pub fn root_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an independent unit of work under the same seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tensor of iid standard normal draws.
pub fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::from_vec(shape, data).expect("volume matches by construction")
}

/// Tensor of iid uniform draws on `[lo, hi)`.
pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    use rand::Rng;
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::from_vec(shape, data).expect("volume matches by construction")
}
