//! Minibatch Adam training of a generative head on a fixed sample set,
//! without conditioning. The conditional forecaster has its own loop that
//! trains the history encoder jointly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::generative::GenerativeHead;
use crate::nn::{AdamConfig, ParamStore};
use crate::rng::stream_rng;
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Optimization budget and stream seed for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// One logged training iteration: named loss parts and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub parts: Vec<(String, f64)>,
    pub total: f64,
}

/// Copies the rows at `indices` out of `data`.
pub fn gather_rows(data: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (_, d) = data.dims2()?;
    let mut out = Tensor::zeros(&[indices.len(), d]);
    for (row, &idx) in indices.iter().enumerate() {
        out.data_mut()[row * d..(row + 1) * d]
            .copy_from_slice(&data.data()[idx * d..(idx + 1) * d]);
    }
    Ok(out)
}

/// Runs `cfg.iters` Adam steps of the head's loss on minibatches drawn
/// with replacement from `data` (`[N x D]` target samples). Interpolant
/// heads must be in vanilla mode, since there is no source series here.
/// Returns the per-iteration loss trace; a non-finite loss aborts with a
/// training-divergence error naming the iteration.
pub fn train_unconditional(
    head: &GenerativeHead,
    store: &mut ParamStore,
    data: &Tensor,
    cfg: &TrainConfig,
) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let (n, _) = data.dims2()?;
    if n == 0 {
        return Err(Error::contract("no training samples"));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.iters);
    for iter in 0..cfg.iters {
        let indices: Vec<usize> = (0..cfg.batch).map(|_| rng.gen_range(0..n)).collect();
        let x1 = gather_rows(data, &indices)?;
        let mut tape = Tape::new();
        let (loss, parts) = head.loss_tape(&mut tape, store, None, &x1, None, &mut rng)?;
        let total = tape.value_scalar(loss)?;
        if !total.is_finite() {
            return Err(Error::TrainingDiverged { iter, loss: total });
        }
        tape.backward(loss)?;
        store.absorb_grads(&tape)?;
        store.adam_step(&adam)?;
        trace.push(TraceRow {
            iter,
            parts: parts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            total,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fieldnet::{FieldNet, FieldNetCfg};
    use crate::rng::randn;

    fn fm_head(seed: u64, store: &mut ParamStore) -> GenerativeHead {
        let net = FieldNet::new(
            "fm",
            FieldNetCfg {
                input_dim: 1,
                hidden: 16,
                blocks: 1,
                time_dim: 8,
                cond_dim: 0,
            },
        )
        .unwrap();
        let mut rng = stream_rng(seed, 0);
        net.init_params(store, &mut rng).unwrap();
        GenerativeHead::Fm {
            sigma_min: 0.01,
            net,
        }
    }

    #[test]
    fn zero_iterations_leave_the_model_unchanged() {
        let mut store = ParamStore::new();
        let head = fm_head(60, &mut store);
        let before: Vec<(String, Vec<f64>)> = store
            .iter()
            .map(|(k, v)| (k.to_string(), v.data().to_vec()))
            .collect();
        let data = randn(&[64, 1], &mut stream_rng(61, 0));
        let cfg = TrainConfig {
            iters: 0,
            batch: 16,
            lr: 1e-3,
            seed: 0,
        };
        let trace = train_unconditional(&head, &mut store, &data, &cfg).unwrap();
        assert!(trace.is_empty());
        for (k, v) in before {
            assert_eq!(store.get(&k).unwrap().data(), v.as_slice());
        }
    }

    #[test]
    fn short_run_reduces_the_loss_on_a_shifted_gaussian() {
        let mut store = ParamStore::new();
        let head = fm_head(62, &mut store);
        let data = randn(&[512, 1], &mut stream_rng(63, 0)).map(|v| 3.0 + 0.1 * v);
        let cfg = TrainConfig {
            iters: 300,
            batch: 64,
            lr: 1e-2,
            seed: 1,
        };
        let trace = train_unconditional(&head, &mut store, &data, &cfg).unwrap();
        assert_eq!(trace.len(), 300);
        let head_mean = |rows: &[TraceRow]| {
            rows.iter().map(|r| r.total).sum::<f64>() / rows.len() as f64
        };
        let early = head_mean(&trace[..50]);
        let late = head_mean(&trace[250..]);
        assert!(
            late < early,
            "loss should fall: early {early:.4}, late {late:.4}"
        );
        assert!(store.all_finite());
    }

    #[test]
    fn non_finite_loss_reports_the_iteration() {
        let mut store = ParamStore::new();
        let head = fm_head(64, &mut store);
        // Poison one weight; the first loss evaluation is then NaN.
        let name = store.names().next().unwrap().to_string();
        store.get_mut(&name).unwrap().data_mut()[0] = f64::NAN;
        let data = randn(&[32, 1], &mut stream_rng(65, 0));
        let cfg = TrainConfig {
            iters: 5,
            batch: 8,
            lr: 1e-3,
            seed: 2,
        };
        match train_unconditional(&head, &mut store, &data, &cfg) {
            Err(Error::TrainingDiverged { iter, .. }) => assert_eq!(iter, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            iters: 1,
            batch: 0,
            lr: 1e-3,
            seed: 0,
        };
        assert!(bad.validate().is_err());
        let bad_lr = TrainConfig {
            iters: 1,
            batch: 1,
            lr: 0.0,
            seed: 0,
        };
        assert!(bad_lr.validate().is_err());
    }
}
