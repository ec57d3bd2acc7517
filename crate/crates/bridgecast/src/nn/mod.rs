//! Trainable parameters and the optimizer.
//!
//! [`ParamStore`] owns every named parameter tensor of a model in a
//! deterministic (sorted) order, harvests gradients from a finished
//! [`Tape`](crate::tape::Tape), and applies Adam updates with bias
//! correction. Checkpointing lives in [`checkpoint`], layer definitions in
//! [`fieldnet`] and [`lstm`], the scalar-time feature map in [`embed`].

pub mod checkpoint;
pub mod embed;
pub mod fieldnet;
pub mod lstm;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Ordered collection of named parameter tensors plus optimizer state.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    moments: BTreeMap<String, Moments>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    /// Register a new parameter; duplicate names are rejected.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::contract(format!("duplicate parameter {name:?}")));
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    /// Parameter names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Name/value pairs in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Total number of scalar parameters.
    pub fn value_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Optimizer steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Record a parameter on a tape, by name.
    pub fn bind(&self, tape: &mut Tape, name: &str) -> Result<crate::tape::Var> {
        tape.param(name, self.get(name)?)
    }

    /// Accumulate the gradients harvested from a finished tape.
    pub fn absorb_grads(&mut self, tape: &Tape) -> Result<()> {
        for (name, grad) in tape.param_grads()? {
            let grad = grad.to_vec();
            self.params
                .get_mut(name)
                .ok_or_else(|| Error::contract(format!("tape parameter {name:?} not in store")))?
                .accumulate_grad(&grad)?;
        }
        Ok(())
    }

    /// One Adam update over every parameter. Errors if any parameter lacks a
    /// gradient, and clears all gradients afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        for (name, p) in &self.params {
            if p.grad().is_none() {
                return Err(Error::contract(format!(
                    "adam_step: parameter {name:?} has no gradient"
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, p) in self.params.iter_mut() {
            let mom = self.moments.entry(name.clone()).or_insert_with(|| Moments {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
            });
            let grad = p.grad().expect("checked above").to_vec();
            let data = p.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
                mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = mom.m[i] / bc1;
                let v_hat = mom.v[i] / bc2;
                data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            p.clear_grad();
        }
        Ok(())
    }

    /// True if every parameter value is finite.
    pub fn all_finite(&self) -> bool {
        self.params.values().all(Tensor::all_finite)
    }
}
