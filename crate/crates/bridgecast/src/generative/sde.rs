//! Euler-Maruyama integration of a single diffusion path.
//!
//! The batched samplers in [`super::sampler`] inline the same update rule
//! for speed; tests there cross-check one-path agreement with this
//! integrator on a shared noise stream.

use crate::error::{Error, Result};
use crate::rng::{randn, stream_rng};
use crate::tensor::Tensor;

/// Integrates `dx = drift(s, x) ds + diffusion(s, x) dW` over `grid`,
/// returning the whole path as a `[grid.len() x dims]` tensor whose first
/// row is `x_init`. Noise is elementwise, drawn from stream 0 of `seed`:
/// `x_{k+1} = x_k + drift dt + diffusion sqrt(dt) xi_k`.
///
/// The grid must be strictly increasing; non-finite drift, diffusion, or
/// state fails with a solver-divergence error naming the step.
pub fn euler_maruyama(
    mut drift: impl FnMut(f64, &Tensor) -> Result<Tensor>,
    mut diffusion: impl FnMut(f64, &Tensor) -> Result<Tensor>,
    x_init: &Tensor,
    grid: &[f64],
    seed: u64,
) -> Result<Tensor> {
    if grid.len() < 2 {
        return Err(Error::contract(format!(
            "integration grid needs at least 2 points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("integration grid must be strictly increasing"));
    }
    let dims = x_init.len();
    let mut rng = stream_rng(seed, 0);
    let mut path = Tensor::zeros(&[grid.len(), dims]);
    let mut x = Tensor::from_vec(&[dims], x_init.data().to_vec())?;
    path.data_mut()[..dims].copy_from_slice(x.data());

    for k in 0..grid.len() - 1 {
        let s = grid[k];
        let dt = grid[k + 1] - s;
        let b = drift(s, &x)?;
        let g = diffusion(s, &x)?;
        if b.len() != dims || g.len() != dims {
            return Err(Error::ShapeMismatch {
                op: "euler_maruyama coefficients",
                lhs: b.shape().to_vec(),
                rhs: vec![dims],
            });
        }
        if !b.all_finite() || !g.all_finite() {
            return Err(Error::SolverDiverged {
                step: k,
                msg: "non-finite drift or diffusion".into(),
            });
        }
        let xi = randn(&[dims], &mut rng);
        let sq = dt.sqrt();
        for j in 0..dims {
            x.data_mut()[j] += b.data()[j] * dt + g.data()[j] * sq * xi.data()[j];
        }
        if !x.all_finite() {
            return Err(Error::SolverDiverged {
                step: k,
                msg: "non-finite state".into(),
            });
        }
        path.data_mut()[(k + 1) * dims..(k + 2) * dims].copy_from_slice(x.data());
    }
    Ok(path)
}

/// `n + 1` evenly spaced points spanning `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    for k in 0..=n {
        g.push(lo + (hi - lo) * k as f64 / n as f64);
    }
    g
}
