//! Two-sample distances between point sets: exact 1-Wasserstein by optimal
//! assignment, its sliced approximation, and kernel MMD.

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::assignment::solve_lap;
use crate::rng::stream_rng;
use crate::tensor::Tensor;

/// Largest point count accepted by the exact assignment; subsample
/// upstream beyond this.
pub const WASSERSTEIN_MAX_N: usize = 4096;

fn check_pair(a: &Tensor, b: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    let (na, da) = a.dims2()?;
    let (nb, db) = b.dims2()?;
    if na != nb || da != db {
        return Err(Error::ShapeMismatch {
            op,
            lhs: vec![na, da],
            rhs: vec![nb, db],
        });
    }
    if na == 0 {
        return Err(Error::contract(format!("{op}: empty point sets")));
    }
    Ok((na, da))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact 1-Wasserstein distance between two equal-size point multisets
/// under Euclidean cost: the mean matched distance of the optimal
/// assignment.
pub fn wasserstein(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (n, _) = check_pair(a, b, "wasserstein")?;
    if n > WASSERSTEIN_MAX_N {
        return Err(Error::contract(format!(
            "wasserstein limited to {WASSERSTEIN_MAX_N} points, got {n}; subsample first"
        )));
    }
    let mut cost = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let ra = a.row(i);
        for j in 0..n {
            *cost.at2_mut(i, j) = euclidean(ra, b.row(j));
        }
    }
    let (_, total) = solve_lap(&cost)?;
    Ok(total / n as f64)
}

/// Mean absolute difference of sorted values: the exact 1-D 1-Wasserstein
/// distance for equal-size samples.
fn wasserstein_1d(mut xs: Vec<f64>, mut ys: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    xs.iter()
        .zip(&ys)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / xs.len() as f64
}

/// Sliced 1-Wasserstein: the average over `n_proj` uniform random unit
/// directions of the 1-D distance between the projected samples.
pub fn sliced_wasserstein(a: &Tensor, b: &Tensor, n_proj: usize, seed: u64) -> Result<f64> {
    let (n, d) = check_pair(a, b, "sliced_wasserstein")?;
    if n_proj == 0 {
        return Err(Error::contract("need at least one projection"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut total = 0.0;
    for _ in 0..n_proj {
        // Uniform direction on the sphere by normalizing a Gaussian draw.
        let mut dir = vec![0.0f64; d];
        loop {
            let mut norm_sq = 0.0;
            for v in dir.iter_mut() {
                *v = rng.sample(rand_distr::StandardNormal);
                norm_sq += *v * *v;
            }
            if norm_sq > 1e-24 {
                let norm = norm_sq.sqrt();
                dir.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
        let project = |t: &Tensor| -> Vec<f64> {
            (0..n)
                .map(|i| t.row(i).iter().zip(&dir).map(|(x, u)| x * u).sum())
                .collect()
        };
        total += wasserstein_1d(project(a), project(b));
    }
    Ok(total / n_proj as f64)
}

/// Kernel families for [`mmd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmdKernel {
    /// Gaussian kernels at bandwidths {sigma/2, sigma, 2 sigma}, sigma the
    /// median pairwise distance of the pooled sample.
    Rbf,
    /// Rational-quadratic kernels at fixed bandwidths {0.2, 0.5, 0.9, 1.3}.
    Multiscale,
}

fn kernel_sum(d_sq: f64, kernel: MmdKernel, sigma: f64) -> f64 {
    match kernel {
        MmdKernel::Rbf => {
            let mut k = 0.0;
            for factor in [0.5, 1.0, 2.0] {
                let h = sigma * factor;
                k += (-d_sq / (2.0 * h * h)).exp();
            }
            k
        }
        MmdKernel::Multiscale => {
            let mut k = 0.0;
            for a in [0.2f64, 0.5, 0.9, 1.3] {
                let a2 = a * a;
                k += a2 / (a2 + d_sq);
            }
            k
        }
    }
}

fn median_pooled_distance(a: &Tensor, b: &Tensor) -> f64 {
    let (n, _) = a.dims2().expect("checked");
    let rows: Vec<&[f64]> = (0..n).map(|i| a.row(i)).chain((0..n).map(|i| b.row(i))).collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            dists.push(euclidean(rows[i], rows[j]));
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    med.max(1e-12)
}

fn mmd_impl(a: &Tensor, b: &Tensor, kernel: MmdKernel, biased: bool) -> Result<f64> {
    let (n, _) = check_pair(a, b, "mmd")?;
    if !biased && n < 2 {
        return Err(Error::contract("unbiased mmd needs at least 2 points per set"));
    }
    let sigma = match kernel {
        MmdKernel::Rbf => median_pooled_distance(a, b),
        MmdKernel::Multiscale => 0.0,
    };
    let nf = n as f64;
    let mut kxx = 0.0;
    let mut kyy = 0.0;
    let mut kxy = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dxy = {
                let d = euclidean(a.row(i), b.row(j));
                d * d
            };
            kxy += kernel_sum(dxy, kernel, sigma);
            if i != j || biased {
                let dxx = {
                    let d = euclidean(a.row(i), a.row(j));
                    d * d
                };
                let dyy = {
                    let d = euclidean(b.row(i), b.row(j));
                    d * d
                };
                kxx += kernel_sum(dxx, kernel, sigma);
                kyy += kernel_sum(dyy, kernel, sigma);
            }
        }
    }
    let (self_norm, cross_norm) = if biased {
        (nf * nf, nf * nf)
    } else {
        (nf * (nf - 1.0), nf * nf)
    };
    Ok(kxx / self_norm + kyy / self_norm - 2.0 * kxy / cross_norm)
}

/// Squared maximum mean discrepancy, unbiased U-statistic estimator.
/// Values are summed over the kernel family's bandwidths. Can dip below 0
/// by estimator noise when the distributions match.
pub fn mmd(a: &Tensor, b: &Tensor, kernel: MmdKernel) -> Result<f64> {
    mmd_impl(a, b, kernel, false)
}

/// Biased V-statistic variant: exactly 0 when `a == b`, never negative in
/// exact arithmetic. Used to verify the estimator.
pub fn mmd_biased(a: &Tensor, b: &Tensor, kernel: MmdKernel) -> Result<f64> {
    mmd_impl(a, b, kernel, true)
}
