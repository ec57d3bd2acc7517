//! Data plumbing: synthetic 2D benchmark generators, autoregressive series
//! generation, CSV ingestion/emission, windowing, and mean scaling.
//!
//! Every generator is a pure function of its arguments and seed.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{randn, stream_rng};
use crate::tensor::Tensor;

/// Per-dimension scale factors from mean scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleStats {
    pub scales: Vec<f64>,
}

/// A `[T x D]` series with row timestamps and a frequency label.
#[derive(Debug, Clone)]
pub struct MultivariateSeries {
    pub values: Tensor,
    pub timestamps: Vec<String>,
    pub freq: String,
}

impl MultivariateSeries {
    pub fn new(values: Tensor, timestamps: Vec<String>, freq: impl Into<String>) -> Result<Self> {
        let (t, _) = values.dims2()?;
        if timestamps.len() != t {
            return Err(Error::contract(format!(
                "{} timestamps for {t} rows",
                timestamps.len()
            )));
        }
        if !values.all_finite() {
            return Err(Error::Data("series contains non-finite values".into()));
        }
        Ok(MultivariateSeries {
            values,
            timestamps,
            freq: freq.into(),
        })
    }

    /// Series with integer-index timestamps starting at `start`.
    pub fn indexed(values: Tensor, start: usize, freq: impl Into<String>) -> Result<Self> {
        let (t, _) = values.dims2()?;
        let ts = (start..start + t).map(|i| i.to_string()).collect();
        Self::new(values, ts, freq)
    }

    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.values.shape()[1]
    }

    /// Time-ordered split: first `ceil(fraction * T)` rows and the rest.
    pub fn split_by_time(&self, fraction: f64) -> Result<(MultivariateSeries, MultivariateSeries)> {
        if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
            return Err(Error::config(format!(
                "split fraction {fraction} outside (0, 1)"
            )));
        }
        let t = self.len();
        let cut = ((fraction * t as f64).ceil() as usize).clamp(1, t.saturating_sub(1));
        let d = self.dims();
        let take = |lo: usize, hi: usize| -> Result<MultivariateSeries> {
            let mut v = Tensor::zeros(&[hi - lo, d]);
            v.data_mut()
                .copy_from_slice(&self.values.data()[lo * d..hi * d]);
            MultivariateSeries::new(v, self.timestamps[lo..hi].to_vec(), self.freq.clone())
        };
        Ok((take(0, cut)?, take(cut, t)?))
    }
}

/// Valid names for [`gen_2d`].
pub const DATASET_2D_NAMES: [&str; 5] = ["8gaussians", "circles", "moons", "rings", "swissroll"];

/// Draws `n` points from one of the named 2D benchmark distributions.
/// All five live on roughly a `[-4, 4]^2` canvas.
pub fn gen_2d(name: &str, n: usize, seed: u64) -> Result<Tensor> {
    gen_2d_with_noise(name, n, seed, None)
}

/// Same as [`gen_2d`] with the generator's noise level overridden; used by
/// tests to pin the noiseless skeletons.
pub fn gen_2d_with_noise(name: &str, n: usize, seed: u64, noise: Option<f64>) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::contract("cannot generate 0 points"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut out = Tensor::zeros(&[n, 2]);
    match name {
        "8gaussians" => {
            // Equal-weight mixture of 8 isotropic Gaussians (std 0.5) on a
            // radius-4 circle at 45 degree spacing.
            let std = noise.unwrap_or(0.5);
            for i in 0..n {
                let k = i % 8;
                let angle = std::f64::consts::FRAC_PI_4 * k as f64;
                let e = randn(&[2], &mut rng);
                *out.at2_mut(i, 0) = 4.0 * angle.cos() + std * e.data()[0];
                *out.at2_mut(i, 1) = 4.0 * angle.sin() + std * e.data()[1];
            }
        }
        "circles" => {
            // Two concentric circles, radii 1 and 0.5, noise std 0.08,
            // rescaled by 4.
            let std = noise.unwrap_or(0.08);
            for i in 0..n {
                let r = if i % 2 == 0 { 1.0 } else { 0.5 };
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let e = randn(&[2], &mut rng);
                *out.at2_mut(i, 0) = 4.0 * (r * theta.cos() + std * e.data()[0]);
                *out.at2_mut(i, 1) = 4.0 * (r * theta.sin() + std * e.data()[1]);
            }
        }
        "moons" => {
            // Two interleaving half-circles, noise std 0.05, centered and
            // rescaled by 4.
            let std = noise.unwrap_or(0.05);
            for i in 0..n {
                let t = rng.gen_range(0.0..std::f64::consts::PI);
                let (mut x, mut y) = if i % 2 == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                let e = randn(&[2], &mut rng);
                x += std * e.data()[0];
                y += std * e.data()[1];
                *out.at2_mut(i, 0) = 4.0 * (x - 0.5);
                *out.at2_mut(i, 1) = 4.0 * (y - 0.25);
            }
        }
        "rings" => {
            // Four concentric circles, radii 1..4 after rescale, noise std
            // 0.08 in pre-scale units.
            let std = noise.unwrap_or(0.08);
            for i in 0..n {
                let r = 0.25 * (1 + i % 4) as f64;
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let e = randn(&[2], &mut rng);
                *out.at2_mut(i, 0) = 4.0 * (r * theta.cos() + std * e.data()[0]);
                *out.at2_mut(i, 1) = 4.0 * (r * theta.sin() + std * e.data()[1]);
            }
        }
        "swissroll" => {
            // Planar spiral t (cos t, sin t), t in [1.5 pi, 4.5 pi], plus
            // noise, shrunk onto the common canvas.
            let std = noise.unwrap_or(0.5);
            for i in 0..n {
                let u: f64 = rng.gen_range(0.0..1.0);
                let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * u);
                let e = randn(&[2], &mut rng);
                *out.at2_mut(i, 0) = (t * t.cos() + std * e.data()[0]) / 3.5;
                *out.at2_mut(i, 1) = (t * t.sin() + std * e.data()[1]) / 3.5;
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown 2d dataset {other:?}; valid names: {}",
                DATASET_2D_NAMES.join(", ")
            )));
        }
    }
    Ok(out)
}

/// Autoregressive process specification. Construction enforces
/// stationarity: all companion-matrix eigenvalues strictly inside the unit
/// circle.
#[derive(Debug, Clone, PartialEq)]
pub struct ArSpec {
    pub coeffs: Vec<f64>,
    pub sigma: f64,
    pub len: usize,
    pub seed: u64,
}

impl ArSpec {
    pub fn new(coeffs: Vec<f64>, sigma: f64, len: usize, seed: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::contract("autoregressive order must be at least 1"));
        }
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::contract(format!("noise std {sigma} must be >= 0")));
        }
        if len == 0 {
            return Err(Error::contract("series length must be positive"));
        }
        let radius = companion_spectral_radius(&coeffs);
        if !(radius < 1.0 - 1e-9) {
            return Err(Error::contract(format!(
                "coefficients are not stationary: companion spectral radius {radius:.6}"
            )));
        }
        Ok(ArSpec {
            coeffs,
            sigma,
            len,
            seed,
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Largest root magnitude of `lambda^p - c1 lambda^{p-1} - ... - cp`,
/// found with the Durand-Kerner simultaneous iteration.
fn companion_spectral_radius(coeffs: &[f64]) -> f64 {
    let p = coeffs.len();
    if p == 1 {
        return coeffs[0].abs();
    }
    // Monic polynomial coefficients, highest power first.
    let poly: Vec<Complex64> = std::iter::once(Complex64::new(1.0, 0.0))
        .chain(coeffs.iter().map(|c| Complex64::new(-c, 0.0)))
        .collect();
    let eval = |z: Complex64| -> Complex64 {
        poly.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let base = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..p).map(|k| base.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut shift = 0.0f64;
        for i in 0..p {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..p {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-13 {
            break;
        }
    }
    roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Simulates the process `x_t = sum_k phi_k x_{t-k} + sigma xi_t` from a
/// zero state, discarding a burn-in of `10 p` steps.
pub fn gen_ar(spec: &ArSpec) -> Result<MultivariateSeries> {
    let p = spec.order();
    let burn = 10 * p;
    let total = spec.len + burn;
    let mut rng = stream_rng(spec.seed, 0);
    let mut full = vec![0.0f64; total + p];
    for t in p..total + p {
        let mut v = 0.0;
        for (k, phi) in spec.coeffs.iter().enumerate() {
            v += phi * full[t - 1 - k];
        }
        if spec.sigma > 0.0 {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            v += spec.sigma * noise;
        }
        full[t] = v;
    }
    let kept = &full[p + burn..];
    let values = Tensor::from_vec(&[spec.len, 1], kept.to_vec())?;
    MultivariateSeries::indexed(values, 0, "step")
}

/// Loads a `timestamp, name1, ..., nameD` CSV into a series. Cells must be
/// finite decimal numbers; any malformed row fails with its line number.
pub fn load_csv(path: &Path, freq: &str) -> Result<MultivariateSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || !cols[0].eq_ignore_ascii_case("timestamp") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header must be 'timestamp,<names...>', got {header:?}"),
        });
    }
    let d = cols.len() - 1;
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected {} cells, got {}", d + 1, cells.len()),
            });
        }
        timestamps.push(cells[0].to_string());
        for cell in &cells[1..] {
            let v = f64::from_str(cell).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("cell {cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("cell {cell:?} is not finite"),
                });
            }
            data.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Data(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let t = timestamps.len();
    MultivariateSeries::new(Tensor::from_vec(&[t, d], data)?, timestamps, freq)
}

/// Writes a series in the format [`load_csv`] reads. Values use the
/// shortest round-trip decimal form, so load-after-write is exact.
pub fn write_csv(series: &MultivariateSeries, path: &Path) -> Result<()> {
    let d = series.dims();
    let mut text = String::from("timestamp");
    for j in 0..d {
        let _ = write!(text, ",x{j}");
    }
    text.push('\n');
    for i in 0..series.len() {
        text.push_str(&series.timestamps[i]);
        for j in 0..d {
            let _ = write!(text, ",{}", series.values.at2(i, j));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// All training windows of a series: row `i` pairs target `x_{t+1}` with
/// source `x_t` and context `x_{t-P..t-1}`.
#[derive(Debug, Clone)]
pub struct WindowSet {
    /// `[N x D]` next-step targets.
    pub targets: Tensor,
    /// `[N x D]` current observations.
    pub sources: Tensor,
    /// `[N x P x D]` history windows, oldest row first.
    pub contexts: Tensor,
    /// The `t` each window is anchored at.
    pub anchors: Vec<usize>,
}

/// A gathered mini-batch of windows.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    pub target: Tensor,
    pub source: Tensor,
    pub context: Tensor,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Copies the windows at `indices` into one dense batch.
    pub fn gather(&self, indices: &[usize]) -> Result<WindowBatch> {
        let b = indices.len();
        if b == 0 {
            return Err(Error::contract("empty window batch"));
        }
        let d = self.targets.shape()[1];
        let p = self.contexts.shape()[1];
        let mut target = Tensor::zeros(&[b, d]);
        let mut source = Tensor::zeros(&[b, d]);
        let mut context = Tensor::zeros(&[b, p, d]);
        for (row, &idx) in indices.iter().enumerate() {
            if idx >= self.len() {
                return Err(Error::contract(format!(
                    "window index {idx} out of range {}",
                    self.len()
                )));
            }
            target.data_mut()[row * d..(row + 1) * d]
                .copy_from_slice(&self.targets.data()[idx * d..(idx + 1) * d]);
            source.data_mut()[row * d..(row + 1) * d]
                .copy_from_slice(&self.sources.data()[idx * d..(idx + 1) * d]);
            context.data_mut()[row * p * d..(row + 1) * p * d]
                .copy_from_slice(&self.contexts.data()[idx * p * d..(idx + 1) * p * d]);
        }
        Ok(WindowBatch {
            target,
            source,
            context,
        })
    }
}

/// Slides a length-`context_len` window over the series: one window per
/// anchor `t` with full history and a next value, `T - P - 1` windows at
/// stride 1.
pub fn make_windows(series: &MultivariateSeries, context_len: usize, stride: usize) -> Result<WindowSet> {
    if context_len == 0 || stride == 0 {
        return Err(Error::contract("context length and stride must be positive"));
    }
    let t_total = series.len();
    let d = series.dims();
    if t_total < context_len + 2 {
        return Err(Error::contract(format!(
            "series length {t_total} too short for context {context_len} (need at least {})",
            context_len + 2
        )));
    }
    let anchors: Vec<usize> = (context_len..t_total - 1).step_by(stride).collect();
    let n = anchors.len();
    let p = context_len;
    let mut targets = Tensor::zeros(&[n, d]);
    let mut sources = Tensor::zeros(&[n, d]);
    let mut contexts = Tensor::zeros(&[n, p, d]);
    let v = series.values.data();
    for (i, &t) in anchors.iter().enumerate() {
        targets.data_mut()[i * d..(i + 1) * d].copy_from_slice(&v[(t + 1) * d..(t + 2) * d]);
        sources.data_mut()[i * d..(i + 1) * d].copy_from_slice(&v[t * d..(t + 1) * d]);
        contexts.data_mut()[i * p * d..(i + 1) * p * d]
            .copy_from_slice(&v[(t - p) * d..t * d]);
    }
    Ok(WindowSet {
        targets,
        sources,
        contexts,
        anchors,
    })
}

/// Divides each dimension by `max(mean |x_d|, 1e-8)`; returns the scaled
/// series and the statistics needed to undo it.
pub fn mean_scale(series: &MultivariateSeries) -> Result<(MultivariateSeries, ScaleStats)> {
    let (t, d) = series.values.dims2()?;
    let mut scales = vec![0.0f64; d];
    for i in 0..t {
        for (j, s) in scales.iter_mut().enumerate() {
            *s += series.values.at2(i, j).abs();
        }
    }
    for s in &mut scales {
        *s = (*s / t as f64).max(1e-8);
    }
    let mut v = series.values.clone();
    for i in 0..t {
        for j in 0..d {
            *v.at2_mut(i, j) /= scales[j];
        }
    }
    let scaled = MultivariateSeries::new(v, series.timestamps.clone(), series.freq.clone())?;
    Ok((scaled, ScaleStats { scales }))
}

/// Applies stored scales to new rows (same transform as [`mean_scale`]).
pub fn scale_values(values: &Tensor, stats: &ScaleStats) -> Result<Tensor> {
    apply_scales(values, stats, |v, s| v / s)
}

/// Inverse of [`scale_values`].
pub fn unscale_values(values: &Tensor, stats: &ScaleStats) -> Result<Tensor> {
    apply_scales(values, stats, |v, s| v * s)
}

fn apply_scales(values: &Tensor, stats: &ScaleStats, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    let d = *values
        .shape()
        .last()
        .ok_or_else(|| Error::contract("scaling needs a non-scalar tensor"))?;
    if d != stats.scales.len() {
        return Err(Error::ShapeMismatch {
            op: "scale",
            lhs: values.shape().to_vec(),
            rhs: vec![stats.scales.len()],
        });
    }
    let mut out = values.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v = f(*v, stats.scales[i % d]);
    }
    Ok(out)
}
