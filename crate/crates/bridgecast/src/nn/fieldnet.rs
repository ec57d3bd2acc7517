//! Residual MLP over (state, time, condition) triples.
//!
//! The same architecture models every learned field in the crate: drift and
//! denoised-noise fields for the interpolant head, noise/score fields for
//! the diffusion baselines and the flow-matching vector field. Input is the
//! concatenation of the state, a sinusoidal time embedding and an optional
//! condition vector; the condition is also re-injected additively at every
//! residual block so it cannot be washed out in depth.
//!
//! Two forward routes are provided and kept in lockstep by tests:
//! [`FieldNet::forward_tape`] records onto an autodiff tape for training,
//! [`FieldNet::infer`] is plain arithmetic for sampling and verification.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::embed::time_embed_batch;
use crate::nn::ParamStore;
use crate::rng::rand_uniform;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Architecture of a [`FieldNet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNetCfg {
    /// State dimension; also the output dimension.
    pub input_dim: usize,
    /// Width of the hidden layers.
    pub hidden: usize,
    /// Number of residual blocks.
    pub blocks: usize,
    /// Width of the sinusoidal time embedding (even).
    pub time_dim: usize,
    /// Condition width; 0 disables conditioning.
    pub cond_dim: usize,
}

impl FieldNetCfg {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.blocks == 0 {
            return Err(Error::contract(format!(
                "field net needs input_dim, hidden, blocks > 0, got {self:?}"
            )));
        }
        if self.time_dim < 2 || self.time_dim % 2 != 0 {
            return Err(Error::contract(format!(
                "field net time_dim must be even and >= 2, got {}",
                self.time_dim
            )));
        }
        Ok(())
    }
}

/// A named residual MLP whose parameters live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct FieldNet {
    prefix: String,
    cfg: FieldNetCfg,
}

impl FieldNet {
    pub fn new(prefix: &str, cfg: FieldNetCfg) -> Result<FieldNet> {
        cfg.validate()?;
        Ok(FieldNet {
            prefix: prefix.to_string(),
            cfg,
        })
    }

    pub fn cfg(&self) -> &FieldNetCfg {
        &self.cfg
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    /// Register this net's parameters: uniform `+-1/sqrt(fan_in)` weights,
    /// zero biases.
    pub fn init_params(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        let c = &self.cfg;
        let in_dim = c.input_dim + c.time_dim + c.cond_dim;
        let weight = |store: &mut ParamStore, name: String, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (rows as f64).sqrt();
            store.insert(&name, rand_uniform(&[rows, cols], -bound, bound, rng))
        };
        weight(store, self.name("in.w"), in_dim, c.hidden, rng)?;
        store.insert(&self.name("in.b"), Tensor::zeros(&[1, c.hidden]))?;
        for k in 0..c.blocks {
            weight(store, self.name(&format!("blk{k}.w1")), c.hidden, c.hidden, rng)?;
            store.insert(&self.name(&format!("blk{k}.b1")), Tensor::zeros(&[1, c.hidden]))?;
            weight(store, self.name(&format!("blk{k}.w2")), c.hidden, c.hidden, rng)?;
            store.insert(&self.name(&format!("blk{k}.b2")), Tensor::zeros(&[1, c.hidden]))?;
            if c.cond_dim > 0 {
                weight(store, self.name(&format!("blk{k}.wc")), c.cond_dim, c.hidden, rng)?;
                store.insert(&self.name(&format!("blk{k}.bc")), Tensor::zeros(&[1, c.hidden]))?;
            }
        }
        weight(store, self.name("out.w"), c.hidden, c.input_dim, rng)?;
        store.insert(&self.name("out.b"), Tensor::zeros(&[1, c.input_dim]))?;
        Ok(())
    }

    fn check_inputs(&self, x: &Tensor, s: &[f64], cond_dims: Option<(usize, usize)>) -> Result<usize> {
        let (b, d) = x.dims2()?;
        if d != self.cfg.input_dim {
            return Err(Error::ShapeMismatch {
                op: "field net state",
                lhs: x.shape().to_vec(),
                rhs: vec![b, self.cfg.input_dim],
            });
        }
        if s.len() != b {
            return Err(Error::contract(format!(
                "field net got {b} states but {} times",
                s.len()
            )));
        }
        match (self.cfg.cond_dim, cond_dims) {
            (0, None) => {}
            (0, Some(_)) => {
                return Err(Error::contract(format!(
                    "field net {:?} is unconditional but received a condition",
                    self.prefix
                )))
            }
            (c, Some((cb, cc))) if cb == b && cc == c => {}
            (c, Some((cb, cc))) => {
                return Err(Error::ShapeMismatch {
                    op: "field net condition",
                    lhs: vec![cb, cc],
                    rhs: vec![b, c],
                })
            }
            (c, None) => {
                return Err(Error::contract(format!(
                    "field net {:?} requires a condition of width {c}",
                    self.prefix
                )))
            }
        }
        Ok(b)
    }

    /// Training-route forward: records onto `tape`, returns the `[B x D]`
    /// output node. `cond` is a tape variable so encoder gradients flow.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: &Tensor,
        s: &[f64],
        cond: Option<Var>,
    ) -> Result<Var> {
        self.check_inputs(x, s, cond.map(|c| tape.dims_of(c)))?;
        let temb = time_embed_batch(s, self.cfg.time_dim)?;
        let vx = tape.leaf(x)?;
        let vt = tape.leaf(&temb)?;
        let cat = match cond {
            Some(vc) => tape.concat_cols(&[vx, vt, vc])?,
            None => tape.concat_cols(&[vx, vt])?,
        };
        let w_in = store.bind(tape, &self.name("in.w"))?;
        let b_in = store.bind(tape, &self.name("in.b"))?;
        let lin = tape.matmul(cat, w_in)?;
        let lin = tape.add_row(lin, b_in)?;
        let mut h = tape.silu(lin);
        for k in 0..self.cfg.blocks {
            let u = match cond {
                Some(vc) if self.cfg.cond_dim > 0 => {
                    let wc = store.bind(tape, &self.name(&format!("blk{k}.wc")))?;
                    let bc = store.bind(tape, &self.name(&format!("blk{k}.bc")))?;
                    let proj = tape.matmul(vc, wc)?;
                    let proj = tape.add_row(proj, bc)?;
                    tape.add(h, proj)?
                }
                _ => h,
            };
            let w1 = store.bind(tape, &self.name(&format!("blk{k}.w1")))?;
            let b1 = store.bind(tape, &self.name(&format!("blk{k}.b1")))?;
            let w2 = store.bind(tape, &self.name(&format!("blk{k}.w2")))?;
            let b2 = store.bind(tape, &self.name(&format!("blk{k}.b2")))?;
            let t = tape.matmul(u, w1)?;
            let t = tape.add_row(t, b1)?;
            let t = tape.silu(t);
            let r = tape.matmul(t, w2)?;
            let r = tape.add_row(r, b2)?;
            h = tape.add(u, r)?;
        }
        let w_out = store.bind(tape, &self.name("out.w"))?;
        let b_out = store.bind(tape, &self.name("out.b"))?;
        let out = tape.matmul(h, w_out)?;
        tape.add_row(out, b_out)
    }

    /// Inference-route forward: plain arithmetic, no tape.
    pub fn infer(
        &self,
        store: &ParamStore,
        x: &Tensor,
        s: &[f64],
        cond: Option<&Tensor>,
    ) -> Result<Tensor> {
        let cond_dims = match cond {
            Some(c) => Some(c.dims2()?),
            None => None,
        };
        self.check_inputs(x, s, cond_dims)?;
        let temb = time_embed_batch(s, self.cfg.time_dim)?;
        let mut parts: Vec<&Tensor> = vec![x, &temb];
        if let Some(c) = cond {
            parts.push(c);
        }
        let cat = concat_cols(&parts)?;
        let mut h = linear(&cat, store.get(&self.name("in.w"))?, store.get(&self.name("in.b"))?)?
            .map(silu);
        for k in 0..self.cfg.blocks {
            let u = match cond {
                Some(c) if self.cfg.cond_dim > 0 => {
                    let proj = linear(
                        c,
                        store.get(&self.name(&format!("blk{k}.wc")))?,
                        store.get(&self.name(&format!("blk{k}.bc")))?,
                    )?;
                    h.add(&proj)?
                }
                _ => h.clone(),
            };
            let t = linear(
                &u,
                store.get(&self.name(&format!("blk{k}.w1")))?,
                store.get(&self.name(&format!("blk{k}.b1")))?,
            )?
            .map(silu);
            let r = linear(
                &t,
                store.get(&self.name(&format!("blk{k}.w2")))?,
                store.get(&self.name(&format!("blk{k}.b2")))?,
            )?;
            h = u.add(&r)?;
        }
        linear(&h, store.get(&self.name("out.w"))?, store.get(&self.name("out.b"))?)
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// `x W + b` with the bias row broadcast over the batch.
fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut y = x.matmul(w)?;
    let (rows, cols) = y.dims2()?;
    if b.len() != cols {
        return Err(Error::ShapeMismatch {
            op: "linear bias",
            lhs: b.shape().to_vec(),
            rhs: vec![1, cols],
        });
    }
    for i in 0..rows {
        for j in 0..cols {
            *y.at2_mut(i, j) += b.data()[j];
        }
    }
    Ok(y)
}

/// Concatenate 2-D tensors along columns.
fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    let rows = parts
        .first()
        .ok_or_else(|| Error::contract("concat_cols needs at least one part"))?
        .rows()?;
    let total: usize = parts.iter().map(|p| p.cols().unwrap_or(0)).sum();
    let mut data = Vec::with_capacity(rows * total);
    for i in 0..rows {
        for p in parts {
            let (r, _) = p.dims2()?;
            if r != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: parts[0].shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            data.extend_from_slice(p.row(i));
        }
    }
    Tensor::from_vec(&[rows, total], data)
}
