//! LSTM encoder that compresses a history window into one vector.
//!
//! The forecaster conditions its generative head on the recent past. The
//! encoder reads a `[P x D]` window step by step and returns the final
//! hidden state of the top layer, so sequences of any length >= 1 map to a
//! fixed-width condition vector.
//!
//! Gate layout follows the usual packed convention: one `[in x 4H]` input
//! weight, one `[H x 4H]` recurrent weight and one bias row per layer, with
//! columns ordered (input, forget, cell, output).

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::rng::rand_uniform;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Architecture of an [`RnnEncoder`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnnEncoderCfg {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

/// Named LSTM encoder whose parameters live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct RnnEncoder {
    prefix: String,
    cfg: RnnEncoderCfg,
}

impl RnnEncoder {
    pub fn new(prefix: &str, cfg: RnnEncoderCfg) -> Result<RnnEncoder> {
        if cfg.input_dim == 0 || cfg.hidden == 0 || cfg.layers == 0 {
            return Err(Error::contract(format!(
                "encoder needs input_dim, hidden, layers > 0, got {cfg:?}"
            )));
        }
        Ok(RnnEncoder {
            prefix: prefix.to_string(),
            cfg,
        })
    }

    pub fn cfg(&self) -> &RnnEncoderCfg {
        &self.cfg
    }

    fn name(&self, layer: usize, part: &str) -> String {
        format!("{}.l{layer}.{part}", self.prefix)
    }

    fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.cfg.input_dim
        } else {
            self.cfg.hidden
        }
    }

    /// Register parameters: uniform `+-1/sqrt(hidden)` weights, zero biases.
    pub fn init_params(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<()> {
        let h = self.cfg.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        for l in 0..self.cfg.layers {
            let d = self.layer_input_dim(l);
            store.insert(&self.name(l, "wx"), rand_uniform(&[d, 4 * h], -bound, bound, rng))?;
            store.insert(&self.name(l, "wh"), rand_uniform(&[h, 4 * h], -bound, bound, rng))?;
            store.insert(&self.name(l, "b"), Tensor::zeros(&[1, 4 * h]))?;
        }
        Ok(())
    }

    fn split_context(&self, context: &Tensor) -> Result<(usize, usize, Vec<Tensor>)> {
        let shape = context.shape();
        let [b, p, d] = *shape else {
            return Err(Error::ShapeMismatch {
                op: "encoder context",
                lhs: shape.to_vec(),
                rhs: vec![0, 0, self.cfg.input_dim],
            });
        };
        if d != self.cfg.input_dim || p == 0 {
            return Err(Error::ShapeMismatch {
                op: "encoder context",
                lhs: shape.to_vec(),
                rhs: vec![b, 1, self.cfg.input_dim],
            });
        }
        let mut steps = Vec::with_capacity(p);
        for t in 0..p {
            let mut data = Vec::with_capacity(b * d);
            for i in 0..b {
                let at = i * p * d + t * d;
                data.extend_from_slice(&context.data()[at..at + d]);
            }
            steps.push(Tensor::from_vec(&[b, d], data)?);
        }
        Ok((b, p, steps))
    }

    /// Training-route encode of a `[B x P x D]` context to a `[B x H]` node.
    pub fn encode_tape(&self, tape: &mut Tape, store: &ParamStore, context: &Tensor) -> Result<Var> {
        let (b, _, steps) = self.split_context(context)?;
        let h_dim = self.cfg.hidden;
        let zeros = Tensor::zeros(&[b, h_dim]);
        let mut layer_inputs: Vec<Var> = steps
            .iter()
            .map(|x| tape.leaf(x))
            .collect::<Result<_>>()?;
        let mut last = tape.leaf(&zeros)?;
        for l in 0..self.cfg.layers {
            let wx = store.bind(tape, &self.name(l, "wx"))?;
            let wh = store.bind(tape, &self.name(l, "wh"))?;
            let bias = store.bind(tape, &self.name(l, "b"))?;
            let mut h = tape.leaf(&zeros)?;
            let mut c = tape.leaf(&zeros)?;
            let mut outputs = Vec::with_capacity(layer_inputs.len());
            for &x in &layer_inputs {
                let gx = tape.matmul(x, wx)?;
                let gh = tape.matmul(h, wh)?;
                let gates = tape.add(gx, gh)?;
                let gates = tape.add_row(gates, bias)?;
                let i_raw = tape.slice_cols(gates, 0, h_dim)?;
                let f_raw = tape.slice_cols(gates, h_dim, 2 * h_dim)?;
                let g_raw = tape.slice_cols(gates, 2 * h_dim, 3 * h_dim)?;
                let o_raw = tape.slice_cols(gates, 3 * h_dim, 4 * h_dim)?;
                let i = tape.sigmoid(i_raw);
                let f = tape.sigmoid(f_raw);
                let g = tape.tanh(g_raw);
                let o = tape.sigmoid(o_raw);
                let fc = tape.mul(f, c)?;
                let ig = tape.mul(i, g)?;
                c = tape.add(fc, ig)?;
                let tc = tape.tanh(c);
                h = tape.mul(o, tc)?;
                outputs.push(h);
            }
            layer_inputs = outputs;
            last = h;
        }
        Ok(last)
    }

    /// Inference-route encode of a `[B x P x D]` context to `[B x H]`.
    pub fn encode_plain(&self, store: &ParamStore, context: &Tensor) -> Result<Tensor> {
        let (b, _, steps) = self.split_context(context)?;
        let h_dim = self.cfg.hidden;
        let mut layer_inputs = steps;
        let mut last = Tensor::zeros(&[b, h_dim]);
        for l in 0..self.cfg.layers {
            let wx = store.get(&self.name(l, "wx"))?;
            let wh = store.get(&self.name(l, "wh"))?;
            let bias = store.get(&self.name(l, "b"))?;
            let mut h = Tensor::zeros(&[b, h_dim]);
            let mut c = Tensor::zeros(&[b, h_dim]);
            let mut outputs = Vec::with_capacity(layer_inputs.len());
            for x in &layer_inputs {
                let mut gates = x.matmul(wx)?.add(&h.matmul(wh)?)?;
                for i in 0..b {
                    for j in 0..4 * h_dim {
                        *gates.at2_mut(i, j) += bias.data()[j];
                    }
                }
                let mut new_c = Tensor::zeros(&[b, h_dim]);
                let mut new_h = Tensor::zeros(&[b, h_dim]);
                for i in 0..b {
                    for j in 0..h_dim {
                        let ig = sigmoid(gates.at2(i, j));
                        let fg = sigmoid(gates.at2(i, h_dim + j));
                        let gg = gates.at2(i, 2 * h_dim + j).tanh();
                        let og = sigmoid(gates.at2(i, 3 * h_dim + j));
                        let cv = fg * c.at2(i, j) + ig * gg;
                        *new_c.at2_mut(i, j) = cv;
                        *new_h.at2_mut(i, j) = og * cv.tanh();
                    }
                }
                c = new_c;
                h = new_h;
                outputs.push(h.clone());
            }
            layer_inputs = outputs;
            last = h;
        }
        Ok(last)
    }

    /// Encode a single `[P x D]` sequence to a length-`H` vector.
    pub fn lstm_encode(&self, store: &ParamStore, sequence: &Tensor) -> Result<Tensor> {
        let (p, d) = sequence.dims2()?;
        let context = sequence.clone().reshape(&[1, p, d])?;
        let h = self.encode_plain(store, &context)?;
        h.reshape(&[self.cfg.hidden])
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
