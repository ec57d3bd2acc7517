//! Training losses for the four heads, in two routes.
//!
//! The `*_field` functions compute loss values over the plain [`Field`]
//! abstraction with explicit random draws, so closed-form oracles can be
//! substituted for networks and values can be pinned in tests. The
//! `*_loss_tape` functions build the same quantities as autodiff graphs for
//! training; equality of the two routes on shared draws is covered by tests
//! here. [`GenerativeHead::loss_tape`] dispatches per head and performs the
//! draws.
//!
//! The interpolant losses are the objectives whose unique minimizers are the
//! velocity field and the conditional latent expectation: quadratic in the
//! net with a linear coupling to the target, so the attained minimum is
//! `-1/2 E w ||target||^2`. Time is drawn from Beta(0.1, 0.1) clipped away
//! from the endpoints with inverse-density importance weights, and every
//! draw is paired antithetically with its sign-flipped latent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::generative::{Field, GenerativeHead, NetField};
use crate::nn::fieldnet::FieldNet;
use crate::nn::ParamStore;
use crate::rng::randn;
use crate::schedules::{DdpmSchedule, InterpolantSchedule, VpSde};
use crate::special::beta_pdf;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Shape parameter of the interpolant time distribution.
pub const SI_TIME_BETA: f64 = 0.1;

/// One diffusion-step draw per batch row for the ddpm loss.
#[derive(Debug, Clone)]
pub struct DdpmDraw {
    /// Step indices in `1..=N`.
    pub steps: Vec<usize>,
    /// `[B x D]` standard normal noise.
    pub eps: Tensor,
}

/// Continuous-time draw for the sgm and fm losses.
#[derive(Debug, Clone)]
pub struct DiffusionDraw {
    pub s: Vec<f64>,
    pub eps: Tensor,
}

/// Interpolant-time draw: clipped Beta times, importance weights, latents.
#[derive(Debug, Clone)]
pub struct SiDraw {
    pub s: Vec<f64>,
    pub weights: Vec<f64>,
    pub z: Tensor,
}

pub fn draw_ddpm(sched: &DdpmSchedule, batch: usize, dims: usize, rng: &mut ChaCha8Rng) -> DdpmDraw {
    let steps = (0..batch).map(|_| rng.gen_range(1..=sched.len())).collect();
    DdpmDraw {
        steps,
        eps: randn(&[batch, dims], rng),
    }
}

/// sgm times are uniform on the clipped interval; the (1 - m^2) weight keeps
/// the integrand bounded near s = 0 anyway, the clip only avoids a useless
/// zero-variance evaluation.
pub fn draw_sgm(batch: usize, dims: usize, clip: f64, rng: &mut ChaCha8Rng) -> DiffusionDraw {
    let s = (0..batch).map(|_| rng.gen_range(clip..1.0)).collect();
    DiffusionDraw {
        s,
        eps: randn(&[batch, dims], rng),
    }
}

pub fn draw_fm(batch: usize, dims: usize, rng: &mut ChaCha8Rng) -> DiffusionDraw {
    let s = (0..batch).map(|_| rng.gen_range(0.0..1.0)).collect();
    DiffusionDraw {
        s,
        eps: randn(&[batch, dims], rng),
    }
}

pub fn draw_si(batch: usize, dims: usize, clip: f64, rng: &mut ChaCha8Rng) -> SiDraw {
    let beta = Beta::new(SI_TIME_BETA, SI_TIME_BETA).expect("valid shape parameters");
    let mut s = Vec::with_capacity(batch);
    let mut weights = Vec::with_capacity(batch);
    for _ in 0..batch {
        let raw: f64 = beta.sample(rng);
        let t = raw.clamp(clip, 1.0 - clip);
        s.push(t);
        weights.push(1.0 / beta_pdf(t, SI_TIME_BETA, SI_TIME_BETA));
    }
    SiDraw {
        s,
        weights,
        z: randn(&[batch, dims], rng),
    }
}

fn check_batch(x1: &Tensor, expected_rows: usize, op: &'static str) -> Result<(usize, usize)> {
    let (b, d) = x1.dims2()?;
    if b == 0 {
        return Err(Error::contract(format!("{op}: empty batch")));
    }
    if expected_rows != 0 && b != expected_rows {
        return Err(Error::ShapeMismatch {
            op,
            lhs: vec![b, d],
            rhs: vec![expected_rows, d],
        });
    }
    Ok((b, d))
}

/// Corrupted states and net time inputs for the ddpm loss:
/// `x_n = sqrt(abar_n) x1 + sqrt(1 - abar_n) eps`, net time `n/N`.
fn ddpm_corrupt(sched: &DdpmSchedule, x1: &Tensor, draw: &DdpmDraw) -> Result<(Tensor, Vec<f64>)> {
    let (b, d) = check_batch(x1, draw.steps.len(), "ddpm corrupt")?;
    let mut xn = Tensor::zeros(&[b, d]);
    let mut s = Vec::with_capacity(b);
    for i in 0..b {
        let n = draw.steps[i];
        if n == 0 || n > sched.len() {
            return Err(Error::contract(format!(
                "ddpm step {n} outside 1..={}",
                sched.len()
            )));
        }
        let ab = sched.alpha_bar(n);
        let (c1, c2) = (ab.sqrt(), (1.0 - ab).sqrt());
        for j in 0..d {
            *xn.at2_mut(i, j) = c1 * x1.at2(i, j) + c2 * draw.eps.at2(i, j);
        }
        s.push(n as f64 / sched.len() as f64);
    }
    Ok((xn, s))
}

/// `x_s = m(s) x1 + sqrt(1 - m^2) eps` rows for the sgm loss.
fn sgm_corrupt(vp: &VpSde, x1: &Tensor, draw: &DiffusionDraw) -> Result<(Tensor, Vec<f64>)> {
    let (b, d) = check_batch(x1, draw.s.len(), "sgm corrupt")?;
    let mut xs = Tensor::zeros(&[b, d]);
    let mut sigmas = Vec::with_capacity(b);
    for i in 0..b {
        let m = vp.mean_coeff(draw.s[i]);
        let sigma = (1.0 - m * m).sqrt();
        for j in 0..d {
            *xs.at2_mut(i, j) = m * x1.at2(i, j) + sigma * draw.eps.at2(i, j);
        }
        sigmas.push(sigma);
    }
    Ok((xs, sigmas))
}

/// Flow-matching path states and targets, row-wise.
fn fm_rows(x1: &Tensor, draw: &DiffusionDraw, sigma_min: f64) -> Result<(Tensor, Tensor)> {
    let (b, d) = check_batch(x1, draw.s.len(), "fm rows")?;
    let mut xs = Tensor::zeros(&[b, d]);
    let mut u = Tensor::zeros(&[b, d]);
    for i in 0..b {
        let s = draw.s[i];
        let shrink = 1.0 - (1.0 - sigma_min) * s;
        for j in 0..d {
            let x = s * x1.at2(i, j) + shrink * draw.eps.at2(i, j);
            *xs.at2_mut(i, j) = x;
            *u.at2_mut(i, j) = (x1.at2(i, j) - (1.0 - sigma_min) * x) / shrink;
        }
    }
    Ok((xs, u))
}

/// Interpolant states and velocity targets, row-wise with per-row times.
fn si_rows(
    sched: &InterpolantSchedule,
    x0: &Tensor,
    x1: &Tensor,
    z: &Tensor,
    s: &[f64],
) -> Result<(Tensor, Tensor)> {
    let (b, d) = check_batch(x1, s.len(), "si rows")?;
    if x0.shape() != x1.shape() || z.shape() != x1.shape() {
        return Err(Error::ShapeMismatch {
            op: "si rows",
            lhs: x0.shape().to_vec(),
            rhs: x1.shape().to_vec(),
        });
    }
    let mut xs = Tensor::zeros(&[b, d]);
    let mut target = Tensor::zeros(&[b, d]);
    for i in 0..b {
        let e = sched.eval(s[i])?;
        for j in 0..d {
            *xs.at2_mut(i, j) =
                e.alpha * x0.at2(i, j) + e.beta * x1.at2(i, j) + e.gamma * z.at2(i, j);
            *target.at2_mut(i, j) =
                e.d_alpha * x0.at2(i, j) + e.d_beta * x1.at2(i, j) + e.d_gamma * z.at2(i, j);
        }
    }
    Ok((xs, target))
}

/// Mean over the batch of the per-row squared norm of `a - b`.
fn mean_row_norm_sq_diff(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (rows, _) = a.dims2()?;
    let d = a.sub(b)?;
    Ok(d.data().iter().map(|v| v * v).sum::<f64>() / rows as f64)
}

/// ddpm noise-matching loss over a plain field: `mean ||field(x_n) - eps||^2`
/// (squared norm summed over dims, averaged over the batch).
pub fn ddpm_loss_field(
    field: &dyn Field,
    sched: &DdpmSchedule,
    x1: &Tensor,
    cond: Option<&Tensor>,
    draw: &DdpmDraw,
) -> Result<f64> {
    let (xn, s) = ddpm_corrupt(sched, x1, draw)?;
    let out = field.eval(&s, &xn, cond)?;
    mean_row_norm_sq_diff(&out, &draw.eps)
}

/// sgm denoising score-matching loss over a score-space field:
/// `mean (1 - m^2) ||score(x_s, s) + eps / sqrt(1 - m^2)||^2`.
pub fn sgm_loss_field(
    score: &dyn Field,
    vp: &VpSde,
    x1: &Tensor,
    cond: Option<&Tensor>,
    draw: &DiffusionDraw,
) -> Result<f64> {
    let (xs, sigmas) = sgm_corrupt(vp, x1, draw)?;
    let out = score.eval(&draw.s, &xs, cond)?;
    let (b, d) = out.dims2()?;
    let mut total = 0.0;
    for i in 0..b {
        let sigma = sigmas[i];
        for j in 0..d {
            let r = out.at2(i, j) + draw.eps.at2(i, j) / sigma;
            total += sigma * sigma * r * r;
        }
    }
    Ok(total / b as f64)
}

/// Flow-matching regression loss over a plain field.
pub fn fm_loss_field(
    field: &dyn Field,
    sigma_min: f64,
    x1: &Tensor,
    cond: Option<&Tensor>,
    draw: &DiffusionDraw,
) -> Result<f64> {
    let (xs, u) = fm_rows(x1, draw, sigma_min)?;
    let out = field.eval(&draw.s, &xs, cond)?;
    mean_row_norm_sq_diff(&out, &u)
}

/// Interpolant losses over plain fields, antithetically paired.
///
/// Returns `(loss_b, loss_s)`:
/// `loss_b = mean w (1/2 ||b||^2 - <velocity_target, b>)`,
/// `loss_s = mean w (1/2 ||zhat||^2 - <z, zhat>)`,
/// each averaged over the `(z, -z)` pair.
pub fn si_loss_field(
    velocity: &dyn Field,
    noise: &dyn Field,
    sched: &InterpolantSchedule,
    x0: &Tensor,
    x1: &Tensor,
    cond: Option<&Tensor>,
    draw: &SiDraw,
) -> Result<(f64, f64)> {
    let (b, _) = check_batch(x1, draw.s.len(), "si loss")?;
    let mut loss_b = 0.0;
    let mut loss_s = 0.0;
    for sign in [1.0, -1.0] {
        let z = draw.z.scale(sign);
        let (xs, target) = si_rows(sched, x0, x1, &z, &draw.s)?;
        let bv = velocity.eval(&draw.s, &xs, cond)?;
        let zv = noise.eval(&draw.s, &xs, cond)?;
        let (rows, d) = bv.dims2()?;
        for i in 0..rows {
            let w = draw.weights[i];
            let mut term_b = 0.0;
            let mut term_s = 0.0;
            for j in 0..d {
                let bij = bv.at2(i, j);
                let zij = zv.at2(i, j);
                term_b += 0.5 * bij * bij - target.at2(i, j) * bij;
                term_s += 0.5 * zij * zij - z.at2(i, j) * zij;
            }
            loss_b += 0.5 * w * term_b;
            loss_s += 0.5 * w * term_s;
        }
    }
    Ok((loss_b / b as f64, loss_s / b as f64))
}

fn require_kind(head: &GenerativeHead, want: &'static str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "{want} operation called on a {:?} head",
            head.kind()
        )))
    }
}

/// ddpm loss on a batch, drawing steps and noise from `rng`.
pub fn ddpm_loss(
    head: &GenerativeHead,
    store: &ParamStore,
    x1: &Tensor,
    cond: Option<&Tensor>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let GenerativeHead::Ddpm { sched, net } = head else {
        return require_kind(head, "ddpm_loss", false).map(|_| unreachable!());
    };
    let (b, d) = check_batch(x1, 0, "ddpm_loss")?;
    let draw = draw_ddpm(sched, b, d, rng);
    ddpm_loss_field(&NetField { net, store }, sched, x1, cond, &draw)
}

/// sgm loss on a batch; the net predicts noise and the loss is evaluated in
/// the algebraically identical `mean ||eps_hat - eps||^2` form.
pub fn sgm_loss(
    head: &GenerativeHead,
    store: &ParamStore,
    x1: &Tensor,
    cond: Option<&Tensor>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let GenerativeHead::Sgm { vp, net } = head else {
        return require_kind(head, "sgm_loss", false).map(|_| unreachable!());
    };
    let (b, d) = check_batch(x1, 0, "sgm_loss")?;
    let draw = draw_sgm(b, d, crate::schedules::DERIV_CLAMP, rng);
    let (xs, _) = sgm_corrupt(vp, x1, &draw)?;
    let out = net.infer(store, &xs, &draw.s, cond)?;
    mean_row_norm_sq_diff(&out, &draw.eps)
}

/// Flow-matching loss on a batch.
pub fn fm_loss(
    head: &GenerativeHead,
    store: &ParamStore,
    x1: &Tensor,
    cond: Option<&Tensor>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let GenerativeHead::Fm { sigma_min, net } = head else {
        return require_kind(head, "fm_loss", false).map(|_| unreachable!());
    };
    let (b, d) = check_batch(x1, 0, "fm_loss")?;
    let draw = draw_fm(b, d, rng);
    fm_loss_field(&NetField { net, store }, *sigma_min, x1, cond, &draw)
}

/// Interpolant loss pair on a batch with an explicit draw (times, weights,
/// latents), so callers control the importance-sampling stream.
pub fn si_loss(
    head: &GenerativeHead,
    store: &ParamStore,
    x0: &Tensor,
    x1: &Tensor,
    cond: Option<&Tensor>,
    draw: &SiDraw,
) -> Result<(f64, f64)> {
    let GenerativeHead::Si {
        sched,
        velocity,
        noise,
        ..
    } = head
    else {
        return require_kind(head, "si_loss", false).map(|_| unreachable!());
    };
    si_loss_field(
        &NetField { net: velocity, store },
        &NetField { net: noise, store },
        sched,
        x0,
        x1,
        cond,
        draw,
    )
}

/// Tape route of the ddpm loss; value equals [`ddpm_loss_field`] on the same
/// draw.
pub fn ddpm_loss_tape(
    tape: &mut Tape,
    store: &ParamStore,
    net: &FieldNet,
    sched: &DdpmSchedule,
    x1: &Tensor,
    cond: Option<Var>,
    draw: &DdpmDraw,
) -> Result<Var> {
    let (xn, s) = ddpm_corrupt(sched, x1, draw)?;
    let out = net.forward_tape(tape, store, &xn, &s, cond)?;
    let eps = tape.leaf(&draw.eps)?;
    let d = tape.sub(out, eps)?;
    let rn = tape.row_norm_sq(d);
    Ok(tape.mean(rn))
}

/// Tape route of the sgm loss in noise-prediction form.
pub fn sgm_loss_tape(
    tape: &mut Tape,
    store: &ParamStore,
    net: &FieldNet,
    vp: &VpSde,
    x1: &Tensor,
    cond: Option<Var>,
    draw: &DiffusionDraw,
) -> Result<Var> {
    let (xs, _) = sgm_corrupt(vp, x1, draw)?;
    let out = net.forward_tape(tape, store, &xs, &draw.s, cond)?;
    let eps = tape.leaf(&draw.eps)?;
    let d = tape.sub(out, eps)?;
    let rn = tape.row_norm_sq(d);
    Ok(tape.mean(rn))
}

/// Tape route of the flow-matching loss.
pub fn fm_loss_tape(
    tape: &mut Tape,
    store: &ParamStore,
    net: &FieldNet,
    sigma_min: f64,
    x1: &Tensor,
    cond: Option<Var>,
    draw: &DiffusionDraw,
) -> Result<Var> {
    let (xs, u) = fm_rows(x1, draw, sigma_min)?;
    let out = net.forward_tape(tape, store, &xs, &draw.s, cond)?;
    let ut = tape.leaf(&u)?;
    let d = tape.sub(out, ut)?;
    let rn = tape.row_norm_sq(d);
    Ok(tape.mean(rn))
}

/// Tape route of the interpolant loss pair.
pub fn si_loss_tape(
    tape: &mut Tape,
    store: &ParamStore,
    velocity: &FieldNet,
    noise: &FieldNet,
    sched: &InterpolantSchedule,
    x0: &Tensor,
    x1: &Tensor,
    cond: Option<Var>,
    draw: &SiDraw,
) -> Result<(Var, Var)> {
    let b = draw.s.len();
    let w = Tensor::from_vec(&[b, 1], draw.weights.clone())?;
    let wv = tape.leaf(&w)?;
    let mut half_b: Vec<Var> = Vec::with_capacity(2);
    let mut half_s: Vec<Var> = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let z = draw.z.scale(sign);
        let (xs, target) = si_rows(sched, x0, x1, &z, &draw.s)?;
        let bv = velocity.forward_tape(tape, store, &xs, &draw.s, cond)?;
        let zv = noise.forward_tape(tape, store, &xs, &draw.s, cond)?;
        let tv = tape.leaf(&target)?;
        let zl = tape.leaf(&z)?;

        let b_sq = tape.row_norm_sq(bv);
        let b_half = tape.scale(b_sq, 0.5);
        let b_dot = tape.row_dot(tv, bv)?;
        let b_term = tape.sub(b_half, b_dot)?;
        let b_weighted = tape.mul(b_term, wv)?;
        half_b.push(tape.mean(b_weighted));

        let z_sq = tape.row_norm_sq(zv);
        let z_half = tape.scale(z_sq, 0.5);
        let z_dot = tape.row_dot(zl, zv)?;
        let z_term = tape.sub(z_half, z_dot)?;
        let z_weighted = tape.mul(z_term, wv)?;
        half_s.push(tape.mean(z_weighted));
    }
    let sum_b = tape.add(half_b[0], half_b[1])?;
    let sum_s = tape.add(half_s[0], half_s[1])?;
    Ok((tape.scale(sum_b, 0.5), tape.scale(sum_s, 0.5)))
}

impl GenerativeHead {
    /// Build this head's training loss on the tape: draws the per-row
    /// randomness from `rng`, returns the scalar loss node plus named loss
    /// values for tracing. For the interpolant head the node is
    /// `loss_b + loss_s`; `x0` is the source batch (ignored in vanilla mode,
    /// where the source is a fresh noise draw; unused by other heads).
    pub fn loss_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x0: Option<&Tensor>,
        x1: &Tensor,
        cond: Option<Var>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Var, Vec<(&'static str, f64)>)> {
        let (b, d) = check_batch(x1, 0, "loss_tape")?;
        match self {
            GenerativeHead::Ddpm { sched, net } => {
                let draw = draw_ddpm(sched, b, d, rng);
                let v = ddpm_loss_tape(tape, store, net, sched, x1, cond, &draw)?;
                Ok((v, vec![("loss", tape.value_scalar(v)?)]))
            }
            GenerativeHead::Sgm { vp, net } => {
                let draw = draw_sgm(b, d, crate::schedules::DERIV_CLAMP, rng);
                let v = sgm_loss_tape(tape, store, net, vp, x1, cond, &draw)?;
                Ok((v, vec![("loss", tape.value_scalar(v)?)]))
            }
            GenerativeHead::Fm { sigma_min, net } => {
                let draw = draw_fm(b, d, rng);
                let v = fm_loss_tape(tape, store, net, *sigma_min, x1, cond, &draw)?;
                Ok((v, vec![("loss", tape.value_scalar(v)?)]))
            }
            GenerativeHead::Si {
                sched,
                vanilla,
                velocity,
                noise,
            } => {
                let draw = draw_si(b, d, crate::schedules::DERIV_CLAMP, rng);
                let noise_source;
                let src = if *vanilla {
                    noise_source = randn(&[b, d], rng);
                    &noise_source
                } else {
                    x0.ok_or_else(|| {
                        Error::contract("interpolant head needs a source batch x0")
                    })?
                };
                let (vb, vs) =
                    si_loss_tape(tape, store, velocity, noise, sched, src, x1, cond, &draw)?;
                let total = tape.add(vb, vs)?;
                Ok((
                    total,
                    vec![
                        ("loss_b", tape.value_scalar(vb)?),
                        ("loss_s", tape.value_scalar(vs)?),
                    ],
                ))
            }
        }
    }
}
