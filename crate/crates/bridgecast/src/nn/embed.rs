//! Sinusoidal features for scalar diffusion time.
//!
//! A scalar `s` is lifted to `dim` features by evaluating sin/cos pairs at
//! `dim/2` geometrically spaced frequencies between 1 and 1000. This gives
//! the field networks a smooth, injective, bounded representation of time.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const FREQ_MIN: f64 = 1.0;
const FREQ_MAX: f64 = 1000.0;

/// Embed one scalar time into `dim` features (`dim` must be even, >= 2).
pub fn time_embed(s: f64, dim: usize) -> Result<Vec<f64>> {
    if dim < 2 || dim % 2 != 0 {
        return Err(Error::contract(format!(
            "time embedding dim must be even and >= 2, got {dim}"
        )));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let t = if half == 1 {
            0.0
        } else {
            k as f64 / (half - 1) as f64
        };
        let freq = FREQ_MIN * (FREQ_MAX / FREQ_MIN).powf(t);
        out.push((freq * s).sin());
        out.push((freq * s).cos());
    }
    Ok(out)
}

/// Embed a batch of times into a `[B x dim]` tensor.
pub fn time_embed_batch(s: &[f64], dim: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(s.len() * dim);
    for &si in s {
        data.extend_from_slice(&time_embed(si, dim)?);
    }
    Tensor::from_vec(&[s.len(), dim], data)
}
