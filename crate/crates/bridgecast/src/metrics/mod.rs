//! Generative-quality distances, probabilistic forecast scores, and the
//! autoregressive refit oracle, plus the JSON report they aggregate into.

pub mod assignment;
pub mod twosample;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use twosample::{mmd, mmd_biased, sliced_wasserstein, wasserstein, MmdKernel};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One aggregated metric: mean over runs, sample std when there are at
/// least two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub mean: f64,
    pub std: Option<f64>,
    pub runs: usize,
}

/// Named metric results; serializes to a flat JSON object
/// `{"name": {"mean": f, "std": f|null, "runs": k}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricReport {
    pub entries: BTreeMap<String, MetricEntry>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a single-run value (no std).
    pub fn add_single(&mut self, name: impl Into<String>, value: f64) {
        self.entries.insert(
            name.into(),
            MetricEntry {
                mean: value,
                std: None,
                runs: 1,
            },
        );
    }

    /// Records a mean/std aggregate over independent runs.
    pub fn add_runs(&mut self, name: impl Into<String>, values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::contract("metric aggregation over zero runs"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n >= 2 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n - 1) as f64;
            Some(var.sqrt())
        } else {
            None
        };
        self.entries.insert(
            name.into(),
            MetricEntry {
                mean,
                std,
                runs: n,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MetricEntry> {
        self.entries.get(name)
    }

    /// Entries in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &MetricEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("metric report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("metric report parse: {e}")))
    }
}

/// Continuous ranked probability score of an empirical sample against one
/// observation: `mean |x_i - y| - mean_{ij} |x_i - x_j| / 2`, computed in
/// O(m log m) via sorted order statistics.
pub fn crps(samples: &[f64], y: f64) -> Result<f64> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::contract("crps needs at least one sample"));
    }
    if samples.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return Err(Error::contract("crps inputs must be finite"));
    }
    let mf = m as f64;
    let term1 = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_{i,j} |x_i - x_j| = 2 * sum_k (2k - m + 1) x_(k), zero-indexed.
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * k as f64 - mf + 1.0) * x)
        .sum::<f64>()
        * 2.0;
    Ok(term1 - pair_sum / (2.0 * mf * mf))
}

/// Sums forecast paths and targets over dimensions, scores each horizon
/// step with [`crps`], and normalizes by the absolute summed target:
/// `sum_h crps_h / sum_h |z_h|`. Returns `None` when the denominator is 0.
///
/// `samples` is `[S x H x D]`, `targets` `[H x D]`.
pub fn crps_sum(samples: &Tensor, targets: &Tensor) -> Result<Option<f64>> {
    let (s, h, _d) = dims3(samples)?;
    let (sums, zsums) = summed_series(samples, targets)?;
    let mut total = 0.0;
    let mut denom = 0.0;
    for step in 0..h {
        let col: Vec<f64> = (0..s).map(|path| sums[path * h + step]).collect();
        total += crps(&col, zsums[step])?;
        denom += zsums[step].abs();
    }
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(total / denom))
}

/// Normalized deviation of the per-step median of the dimension-summed
/// forecast: `sum_h |median_h - z_h| / sum_h |z_h|`.
pub fn nd_sum(samples: &Tensor, targets: &Tensor) -> Result<Option<f64>> {
    let medians_targets = median_summed(samples, targets)?;
    let mut num = 0.0;
    let mut denom = 0.0;
    for (m, z) in &medians_targets {
        num += (m - z).abs();
        denom += z.abs();
    }
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(num / denom))
}

/// Root-mean-square error of the per-step median on the dimension-summed
/// series, normalized by the mean absolute summed target.
pub fn nrmse_sum(samples: &Tensor, targets: &Tensor) -> Result<Option<f64>> {
    let medians_targets = median_summed(samples, targets)?;
    let h = medians_targets.len() as f64;
    let mut sq = 0.0;
    let mut denom = 0.0;
    for (m, z) in &medians_targets {
        sq += (m - z) * (m - z);
        denom += z.abs();
    }
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((sq / h).sqrt() / (denom / h)))
}

fn dims3(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        other => Err(Error::ShapeMismatch {
            op: "forecast samples",
            lhs: other.to_vec(),
            rhs: vec![0, 0, 0],
        }),
    }
}

/// Per-path per-step dimension sums (`[S*H]`, path-major) and the summed
/// target per step.
fn summed_series(samples: &Tensor, targets: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let (s, h, d) = dims3(samples)?;
    let (ht, dt) = targets.dims2()?;
    if ht != h || dt != d {
        return Err(Error::ShapeMismatch {
            op: "forecast targets",
            lhs: vec![ht, dt],
            rhs: vec![h, d],
        });
    }
    if s == 0 || h == 0 {
        return Err(Error::contract("empty forecast sample set"));
    }
    let data = samples.data();
    let mut sums = vec![0.0f64; s * h];
    for path in 0..s {
        for step in 0..h {
            let base = (path * h + step) * d;
            sums[path * h + step] = data[base..base + d].iter().sum();
        }
    }
    let zsums: Vec<f64> = (0..h).map(|step| targets.row(step).iter().sum()).collect();
    Ok((sums, zsums))
}

/// Pairs of (per-step median of summed samples, summed target).
fn median_summed(samples: &Tensor, targets: &Tensor) -> Result<Vec<(f64, f64)>> {
    let (s, h, _) = dims3(samples)?;
    let (sums, zsums) = summed_series(samples, targets)?;
    let mut out = Vec::with_capacity(h);
    for step in 0..h {
        let mut col: Vec<f64> = (0..s).map(|path| sums[path * h + step]).collect();
        col.sort_by(f64::total_cmp);
        let med = if s % 2 == 1 {
            col[s / 2]
        } else {
            0.5 * (col[s / 2 - 1] + col[s / 2])
        };
        out.push((med, zsums[step]));
    }
    Ok(out)
}

/// Ordinary least squares fit of an order-`p` autoregression to a 1-D
/// series; returns the lag coefficients.
pub fn fit_ar(series: &[f64], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::contract("autoregressive order must be positive"));
    }
    let t = series.len();
    if t <= 2 * p {
        return Err(Error::contract(format!(
            "series length {t} too short to fit {p} lags (need > {})",
            2 * p
        )));
    }
    // Normal equations: G phi = r over rows t = p..T-1, where
    // G[a][b] = sum x_{t-1-a} x_{t-1-b} and r[a] = sum x_t x_{t-1-a}.
    let mut g = vec![vec![0.0f64; p]; p];
    let mut r = vec![0.0f64; p];
    for t_i in p..t {
        for a in 0..p {
            r[a] += series[t_i] * series[t_i - 1 - a];
            for b in a..p {
                g[a][b] += series[t_i - 1 - a] * series[t_i - 1 - b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[a][b] = g[b][a];
        }
    }
    solve_symmetric(&mut g, &mut r)?;
    Ok(r)
}

/// Gaussian elimination with partial pivoting; solution overwrites `rhs`.
fn solve_symmetric(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Data(
                "degenerate lag design matrix (constant or too-short series)".into(),
            ));
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = rhs[col];
        for k in col + 1..n {
            v -= a[col][k] * rhs[k];
        }
        rhs[col] = v / a[col][col];
    }
    Ok(())
}

/// Mean absolute difference between true and fitted lag coefficients.
pub fn ar_param_error(true_coeffs: &[f64], fitted: &[f64]) -> Result<f64> {
    if true_coeffs.len() != fitted.len() {
        return Err(Error::ShapeMismatch {
            op: "ar_param_error",
            lhs: vec![true_coeffs.len()],
            rhs: vec![fitted.len()],
        });
    }
    if true_coeffs.is_empty() {
        return Err(Error::contract("no coefficients to compare"));
    }
    Ok(true_coeffs
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / true_coeffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_ar, ArSpec};
    use crate::rng::{randn, stream_rng};
    use rand::Rng;

    fn crps_brute(samples: &[f64], y: f64) -> f64 {
        let m = samples.len() as f64;
        let t1 = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / m;
        let mut t2 = 0.0;
        for a in samples {
            for b in samples {
                t2 += (a - b).abs();
            }
        }
        t1 - t2 / (2.0 * m * m)
    }

    #[test]
    fn crps_pinned_examples() {
        assert_eq!(crps(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert_eq!(crps(&[5.0], 2.0).unwrap(), 3.0);
        // Duplicated single sample reduces to |x - y| for any m.
        for m in [2, 7, 100] {
            let xs = vec![1.25; m];
            assert!((crps(&xs, -0.75).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crps_fast_path_matches_brute_force() {
        let mut rng = stream_rng(50, 0);
        for _ in 0..20 {
            let m = rng.gen_range(1..60);
            let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y = rng.gen_range(-3.0..3.0);
            let fast = crps(&xs, y).unwrap();
            let slow = crps_brute(&xs, y);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn crps_gaussian_closed_form() {
        // For samples from N(0,1) and y = 0 the population value is
        // 2 phi(0) - 1/sqrt(pi).
        let mut rng = stream_rng(51, 0);
        let xs = randn(&[10_000], &mut rng);
        let v = crps(xs.data(), 0.0).unwrap();
        let expect = 2.0 / (2.0 * std::f64::consts::PI).sqrt()
            - 1.0 / std::f64::consts::PI.sqrt();
        assert!((v - expect).abs() < 0.01, "crps {v} vs {expect}");
    }

    #[test]
    fn crps_sum_hand_instance() {
        // H=1, D=2: samples {(1,1),(3,3)}, target (2,2); summed samples
        // {2,6} vs 4 give crps 1, normalized by |4| -> 0.25.
        let samples = Tensor::from_vec(&[2, 1, 2], vec![1.0, 1.0, 3.0, 3.0]).unwrap();
        let target = Tensor::from_vec(&[1, 2], vec![2.0, 2.0]).unwrap();
        let v = crps_sum(&samples, &target).unwrap().unwrap();
        assert!((v - 0.25).abs() < 1e-12, "crps_sum {v}");
    }

    #[test]
    fn summed_scores_zero_on_perfect_forecasts_and_flag_zero_denominators() {
        let mut rng = stream_rng(52, 0);
        let target = randn(&[4, 3], &mut rng);
        // All paths equal the target.
        let mut samples = Tensor::zeros(&[5, 4, 3]);
        for path in 0..5 {
            samples.data_mut()[path * 12..(path + 1) * 12].copy_from_slice(target.data());
        }
        // crps keeps ~1e-18 of accumulation residue on identical samples;
        // the median scores are exactly 0.
        assert!(crps_sum(&samples, &target).unwrap().unwrap().abs() < 1e-15);
        assert_eq!(nd_sum(&samples, &target).unwrap(), Some(0.0));
        assert_eq!(nrmse_sum(&samples, &target).unwrap(), Some(0.0));

        // Zero-sum targets make the normalizers undefined.
        let zero_t = Tensor::zeros(&[4, 3]);
        assert_eq!(crps_sum(&samples, &zero_t).unwrap(), None);
        assert_eq!(nd_sum(&samples, &zero_t).unwrap(), None);
        assert_eq!(nrmse_sum(&samples, &zero_t).unwrap(), None);
    }

    #[test]
    fn summed_scores_are_invariant_to_path_order() {
        let mut rng = stream_rng(53, 0);
        let s = 7;
        let samples = randn(&[s, 3, 2], &mut rng);
        let target = randn(&[3, 2], &mut rng);
        let mut rev = Tensor::zeros(&[s, 3, 2]);
        for path in 0..s {
            let src = &samples.data()[(s - 1 - path) * 6..(s - path) * 6];
            rev.data_mut()[path * 6..(path + 1) * 6].copy_from_slice(src);
        }
        for f in [crps_sum, nd_sum, nrmse_sum] {
            let a = f(&samples, &target).unwrap().unwrap();
            let b = f(&rev, &target).unwrap().unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_bias_scores() {
        // Constant target c = 2, median forecast c + b with b = 0.5:
        // ND = NRMSE = |b| / |c|.
        let target = Tensor::filled(&[6, 1], 2.0);
        let samples = Tensor::filled(&[3, 6, 1], 2.5);
        let nd = nd_sum(&samples, &target).unwrap().unwrap();
        let nrmse = nrmse_sum(&samples, &target).unwrap().unwrap();
        assert!((nd - 0.25).abs() < 1e-12);
        assert!((nrmse - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fit_ar_recovers_noiseless_and_noisy_coefficients() {
        // Noiseless AR(1) from a nonzero start is an exact linear system.
        let mut xs = vec![1.0f64];
        for _ in 1..50 {
            xs.push(0.8 * xs.last().unwrap());
        }
        let phi = fit_ar(&xs, 1).unwrap();
        assert!((phi[0] - 0.8).abs() < 1e-10, "phi {}", phi[0]);

        let spec = ArSpec::new(vec![0.8], 1.0, 100_000, 3).unwrap();
        let s = gen_ar(&spec).unwrap();
        let phi = fit_ar(s.values.data(), 1).unwrap();
        assert!((phi[0] - 0.8).abs() < 0.02, "phi {}", phi[0]);

        // AR(2) with known coefficients.
        let spec = ArSpec::new(vec![0.5, 0.3], 1.0, 100_000, 4).unwrap();
        let s = gen_ar(&spec).unwrap();
        let phi = fit_ar(s.values.data(), 2).unwrap();
        assert!((phi[0] - 0.5).abs() < 0.02 && (phi[1] - 0.3).abs() < 0.02, "{phi:?}");
    }

    #[test]
    fn fit_ar_on_white_noise_stays_near_zero() {
        let t = 100_000;
        let xs = randn(&[t], &mut stream_rng(54, 0));
        let phi = fit_ar(xs.data(), 1).unwrap();
        assert!(phi[0].abs() < 3.0 / (t as f64).sqrt(), "phi {}", phi[0]);
    }

    #[test]
    fn fit_ar_guards() {
        assert!(fit_ar(&[1.0, 2.0], 1).is_err());
        assert!(fit_ar(&[1.0; 10], 0).is_err());
        // Constant series has a singular design after centering... here the
        // Gram matrix is rank 1 only for p >= 2.
        assert!(fit_ar(&[1.0; 10], 2).is_err());
    }

    #[test]
    fn ar_error_is_the_mean_absolute_difference() {
        assert_eq!(ar_param_error(&[0.8], &[0.8]).unwrap(), 0.0);
        assert!((ar_param_error(&[0.8], &[0.7]).unwrap() - 0.1).abs() < 1e-12);
        let mut rng = stream_rng(55, 0);
        for _ in 0..10 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expect = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 3.0;
            assert!((ar_param_error(&a, &b).unwrap() - expect).abs() < 1e-12);
        }
        assert!(ar_param_error(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn report_aggregation_and_json_shape() {
        let mut r = MetricReport::new();
        r.add_single("wasserstein", 0.25);
        r.add_runs("crps_sum", &[1.0, 2.0, 3.0]).unwrap();
        let e = r.get("crps_sum").unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std, Some(1.0));
        assert_eq!(e.runs, 3);
        assert_eq!(r.get("wasserstein").unwrap().std, None);

        let json = r.to_json().unwrap();
        assert!(json.contains("\"crps_sum\""), "{json}");
        let back = MetricReport::from_json(&json).unwrap();
        assert_eq!(back, r);

        let single = MetricReport::from_json(
            "{\"x\":{\"mean\":1.0,\"std\":null,\"runs\":1}}",
        )
        .unwrap();
        assert_eq!(single.get("x").unwrap().std, None);
    }
}
