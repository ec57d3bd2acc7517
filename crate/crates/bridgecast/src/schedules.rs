//! Diffusion-time schedules.
//!
//! Three families live here:
//!
//! * [`InterpolantSchedule`]: coefficient triples (alpha, beta, gamma) with
//!   analytic derivatives for stochastic-interpolant bridges
//!   `x_s = alpha(s) x0 + beta(s) x1 + gamma(s) z`.
//! * [`DdpmSchedule`]: discrete beta ladders (linear and cosine) with cached
//!   cumulative products for denoising-diffusion training and sampling.
//! * [`VpSde`]: the continuous variance-preserving forward SDE used by the
//!   score-based head, plus [`fm_path`], the conditional flow-matching path
//!   and its closed-form regression target.
//!
//! Everything is a pure function of its arguments and cheap enough to call
//! per batch element.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interpolant coefficient family for (alpha, beta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpKind {
    /// alpha = 1 - s, beta = s.
    Linear,
    /// alpha = sqrt(1 - gamma^2) cos(pi s / 2), beta likewise with sin.
    Trig,
}

/// Latent-noise amplitude family gamma(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaKind {
    /// gamma = sqrt(2 s (1 - s)).
    Sqrt,
    /// gamma = s (1 - s).
    Quad,
    /// gamma = sin^2(pi s).
    Trig,
}

/// Width of the boundary clamp applied to derivative evaluations: the sqrt
/// gamma has infinite slope at s = 0 and s = 1, so derivative queries are
/// evaluated at clamp(s, DERIV_CLAMP, 1 - DERIV_CLAMP). Values are never
/// clamped. Samplers and loss draws stay inside the same band.
pub const DERIV_CLAMP: f64 = 1e-3;

/// One interpolant schedule: an (interp, gamma) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpolantSchedule {
    pub interp: InterpKind,
    pub gamma: GammaKind,
}

/// All six schedule outputs at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEval {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
    pub d_gamma: f64,
}

impl InterpolantSchedule {
    pub fn new(interp: InterpKind, gamma: GammaKind) -> InterpolantSchedule {
        InterpolantSchedule { interp, gamma }
    }

    /// Identity string used in configs and result tables.
    pub fn identity(&self) -> String {
        let i = match self.interp {
            InterpKind::Linear => "linear",
            InterpKind::Trig => "trig",
        };
        let g = match self.gamma {
            GammaKind::Sqrt => "sqrt",
            GammaKind::Quad => "quad",
            GammaKind::Trig => "trig",
        };
        format!("si({i},{g})")
    }

    fn gamma_at(&self, s: f64) -> f64 {
        match self.gamma {
            GammaKind::Sqrt => (2.0 * s * (1.0 - s)).sqrt(),
            GammaKind::Quad => s * (1.0 - s),
            GammaKind::Trig => {
                let v = (std::f64::consts::PI * s).sin();
                v * v
            }
        }
    }

    fn d_gamma_at(&self, s: f64) -> f64 {
        match self.gamma {
            GammaKind::Sqrt => (1.0 - 2.0 * s) / (2.0 * s * (1.0 - s)).sqrt(),
            GammaKind::Quad => 1.0 - 2.0 * s,
            GammaKind::Trig => std::f64::consts::PI * (2.0 * std::f64::consts::PI * s).sin(),
        }
    }

    /// Evaluate all six schedule outputs.
    ///
    /// Derivatives are the exact analytic derivatives of the closed forms,
    /// evaluated at the [`DERIV_CLAMP`]-clamped time. For the (trig, trig)
    /// pair, gamma touches 1 at s = 1/2 where sqrt(1 - gamma^2) has a kink;
    /// the radius is floored at 1e-12 there so the derivative outputs stay
    /// finite (and zero, matching the symmetric limit of central
    /// differences).
    pub fn eval(&self, s: f64) -> Result<ScheduleEval> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::contract(format!(
                "schedule time {s} outside [0, 1]"
            )));
        }
        let sc = s.clamp(DERIV_CLAMP, 1.0 - DERIV_CLAMP);
        let gamma = self.gamma_at(s);
        let d_gamma = self.d_gamma_at(sc);
        let (alpha, beta, d_alpha, d_beta) = match self.interp {
            InterpKind::Linear => (1.0 - s, s, -1.0, 1.0),
            InterpKind::Trig => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                let r = (1.0 - gamma * gamma).max(0.0).sqrt();
                let alpha = r * (half_pi * s).cos();
                let beta = r * (half_pi * s).sin();
                // d/ds sqrt(1 - gamma^2) = -gamma gamma' / r, at the
                // clamped time and with the kink guard on r.
                let g_c = self.gamma_at(sc);
                let r_c = (1.0 - g_c * g_c).max(0.0).sqrt().max(1e-12);
                let dr = -g_c * self.d_gamma_at(sc) / r_c;
                let d_alpha = dr * (half_pi * sc).cos() - half_pi * r_c * (half_pi * sc).sin();
                let d_beta = dr * (half_pi * sc).sin() + half_pi * r_c * (half_pi * sc).cos();
                (alpha, beta, d_alpha, d_beta)
            }
        };
        Ok(ScheduleEval {
            alpha,
            beta,
            gamma,
            d_alpha,
            d_beta,
            d_gamma,
        })
    }
}

/// Bridge state `alpha(s) x0 + beta(s) x1 + gamma(s) z`.
pub fn interpolate(
    sched: &InterpolantSchedule,
    s: f64,
    x0: &Tensor,
    x1: &Tensor,
    z: &Tensor,
) -> Result<Tensor> {
    let e = sched.eval(s)?;
    combine(x0, x1, z, e.alpha, e.beta, e.gamma)
}

/// Regression target `alpha'(s) x0 + beta'(s) x1 + gamma'(s) z` for the
/// velocity field.
pub fn velocity_target(
    sched: &InterpolantSchedule,
    s: f64,
    x0: &Tensor,
    x1: &Tensor,
    z: &Tensor,
) -> Result<Tensor> {
    let e = sched.eval(s)?;
    combine(x0, x1, z, e.d_alpha, e.d_beta, e.d_gamma)
}

fn combine(x0: &Tensor, x1: &Tensor, z: &Tensor, a: f64, b: f64, c: f64) -> Result<Tensor> {
    if x0.shape() != x1.shape() || x0.shape() != z.shape() {
        return Err(Error::ShapeMismatch {
            op: "interpolant combine",
            lhs: x0.shape().to_vec(),
            rhs: if x0.shape() != x1.shape() {
                x1.shape().to_vec()
            } else {
                z.shape().to_vec()
            },
        });
    }
    let mut out = x0.scale(a);
    for ((o, &v1), &vz) in out.data_mut().iter_mut().zip(x1.data()).zip(z.data()) {
        *o += b * v1 + c * vz;
    }
    Ok(out)
}

/// Discrete beta-ladder family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DdpmKind {
    Linear,
    Cosine,
}

const DDPM_BETA_MIN: f64 = 1e-4;
const DDPM_BETA_MAX: f64 = 0.02;
const COSINE_OFFSET: f64 = 0.008;
const BETA_CLIP: f64 = 0.999;

/// Discrete noise ladder with cached cumulative products.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpmSchedule {
    kind: DdpmKind,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl DdpmSchedule {
    /// Build a ladder of `n` steps.
    ///
    /// Linear: betas evenly spaced over `[1e-4, 0.02]` (a single step uses
    /// the lower endpoint). Cosine: `alpha_bar(u) = f(u)/f(0)` with
    /// `f(u) = cos^2((u + 0.008)/1.008 * pi/2)`, converted to per-step betas
    /// clipped at 0.999; the cached `alpha_bar` array is the exact running
    /// product of `(1 - beta)` so it stays consistent with the clip.
    pub fn new(kind: DdpmKind, n: usize) -> Result<DdpmSchedule> {
        if n == 0 {
            return Err(Error::contract("ddpm schedule needs at least one step"));
        }
        let betas: Vec<f64> = match kind {
            DdpmKind::Linear => (0..n)
                .map(|i| {
                    if n == 1 {
                        DDPM_BETA_MIN
                    } else {
                        DDPM_BETA_MIN
                            + (DDPM_BETA_MAX - DDPM_BETA_MIN) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
            DdpmKind::Cosine => {
                let f = |u: f64| {
                    let c = ((u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)
                        * std::f64::consts::FRAC_PI_2)
                        .cos();
                    c * c
                };
                (1..=n)
                    .map(|i| {
                        let beta = 1.0 - f(i as f64 / n as f64) / f((i - 1) as f64 / n as f64);
                        beta.min(BETA_CLIP)
                    })
                    .collect()
            }
        };
        let mut alpha_bars = Vec::with_capacity(n);
        let mut prod = 1.0;
        for &b in &betas {
            prod *= 1.0 - b;
            alpha_bars.push(prod);
        }
        let sched = DdpmSchedule {
            kind,
            betas,
            alpha_bars,
        };
        sched.validate()?;
        Ok(sched)
    }

    fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for (i, &b) in self.betas.iter().enumerate() {
            if !(b > prev && b < 1.0) && !(self.betas.len() == 1 && b > 0.0 && b < 1.0) {
                return Err(Error::contract(format!(
                    "ddpm betas must be strictly increasing in (0, 1); beta[{i}] = {b} after {prev}"
                )));
            }
            prev = b;
        }
        for w in self.alpha_bars.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::contract(
                    "ddpm alpha_bar must be strictly decreasing",
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> DdpmKind {
        self.kind
    }

    /// Identity string used in configs and result tables.
    pub fn identity(&self) -> String {
        match self.kind {
            DdpmKind::Linear => "ddpm(linear)".into(),
            DdpmKind::Cosine => "ddpm(cosine)".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// `beta_n` for step `n` in `1..=N`.
    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n - 1]
    }

    /// `alpha_bar_n = prod_{k<=n} (1 - beta_k)` for `n` in `0..=N`
    /// (`alpha_bar_0 = 1`).
    pub fn alpha_bar(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.alpha_bars[n - 1]
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// Default noise floor of the flow-matching path.
pub const FM_SIGMA_MIN: f64 = 0.01;

/// Conditional flow-matching path and its closed-form target.
///
/// `x_s = s x1 + (1 - (1 - sigma_min) s) eps` and
/// `u = (x1 - (1 - sigma_min) x_s) / (1 - (1 - sigma_min) s)`; the
/// denominator stays >= sigma_min.
pub fn fm_path(s: f64, x1: &Tensor, eps: &Tensor, sigma_min: f64) -> Result<(Tensor, Tensor)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::contract(format!("fm path time {s} outside [0, 1]")));
    }
    if sigma_min <= 0.0 {
        return Err(Error::contract(format!(
            "fm sigma_min must be positive, got {sigma_min}"
        )));
    }
    if x1.shape() != eps.shape() {
        return Err(Error::ShapeMismatch {
            op: "fm_path",
            lhs: x1.shape().to_vec(),
            rhs: eps.shape().to_vec(),
        });
    }
    let shrink = 1.0 - (1.0 - sigma_min) * s;
    let xs = x1
        .scale(s)
        .add(&eps.scale(shrink))
        .expect("shapes checked above");
    let u = x1
        .sub(&xs.scale(1.0 - sigma_min))
        .expect("shapes checked above")
        .scale(1.0 / shrink);
    Ok((xs, u))
}

/// Continuous variance-preserving forward SDE
/// `dx = -1/2 beta(s) x ds + sqrt(beta(s)) dW` with linear
/// `beta(s) = beta_min + s (beta_max - beta_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpSde {
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for VpSde {
    fn default() -> Self {
        VpSde {
            beta_min: 0.1,
            beta_max: 20.0,
        }
    }
}

impl VpSde {
    pub fn new(beta_min: f64, beta_max: f64) -> Result<VpSde> {
        if !(beta_min > 0.0 && beta_max > beta_min) {
            return Err(Error::contract(format!(
                "vp sde needs 0 < beta_min < beta_max, got {beta_min}, {beta_max}"
            )));
        }
        Ok(VpSde { beta_min, beta_max })
    }

    pub fn beta(&self, s: f64) -> f64 {
        self.beta_min + s * (self.beta_max - self.beta_min)
    }

    /// Mean shrinkage `m(s) = exp(-1/2 int_0^s beta(u) du)`; the perturbed
    /// marginal is `N(m(s) x1, (1 - m(s)^2) I)`.
    pub fn mean_coeff(&self, s: f64) -> f64 {
        (-0.25 * s * s * (self.beta_max - self.beta_min) - 0.5 * s * self.beta_min).exp()
    }

    /// Marginal perturbation variance `1 - m(s)^2`.
    pub fn var(&self, s: f64) -> f64 {
        let m = self.mean_coeff(s);
        1.0 - m * m
    }
}
