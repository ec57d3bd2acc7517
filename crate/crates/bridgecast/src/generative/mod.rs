//! The four generative heads behind one interface.
//!
//! Every head owns its field network(s) and schedule and exposes two things:
//! a training loss on a batch (tape route, [`GenerativeHead::loss_tape`]) and
//! conditional sampling (see [`sampler`]). The heads:
//!
//! * `ddpm` — discrete denoising diffusion, noise-prediction net.
//! * `sgm` — continuous variance-preserving reverse SDE, score via a
//!   noise-prediction net.
//! * `fm` — conditional flow matching, direct vector-field net.
//! * `si` — stochastic interpolant bridging a source sample to the target,
//!   with two nets: a velocity field and a denoised-latent field whose
//!   rescaling gives the score.
//!
//! Loss math is also exported over a plain [`Field`] abstraction (see
//! [`loss`]) so closed-form oracles can stand in for networks in tests.

pub mod loss;
pub mod sampler;
pub mod sde;
pub mod train;

pub use sampler::SampleSource;
pub use train::{train_unconditional, TrainConfig, TraceRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::fieldnet::FieldNet;
use crate::nn::ParamStore;
use crate::schedules::{DdpmSchedule, InterpolantSchedule, VpSde};
use crate::tensor::Tensor;

/// Head discriminant used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Ddpm,
    Sgm,
    Fm,
    Si,
}

/// Integrator settings shared by all samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of uniform integration steps.
    pub steps: usize,
    /// Diffusion scale of the interpolant SDE; 0 selects the deterministic
    /// probability-flow dynamics (for sgm as well).
    pub epsilon: f64,
    /// Endpoint clip of the diffusion-time interval, in (0, 0.1].
    pub clip_delta: f64,
    /// Root seed; per-path generators are derived from it by counter.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            steps: 100,
            epsilon: 0.5,
            clip_delta: 1e-3,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::contract("solver needs at least one step"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::contract(format!(
                "solver epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.clip_delta > 0.0 && self.clip_delta <= 0.1) {
            return Err(Error::contract(format!(
                "solver clip_delta must lie in (0, 0.1], got {}",
                self.clip_delta
            )));
        }
        Ok(())
    }

    /// Uniform grid over `[clip_delta, 1 - clip_delta]` with `steps` steps
    /// (`steps + 1` points).
    pub fn clipped_grid(&self) -> Vec<f64> {
        let lo = self.clip_delta;
        let hi = 1.0 - self.clip_delta;
        (0..=self.steps)
            .map(|k| lo + (hi - lo) * k as f64 / self.steps as f64)
            .collect()
    }
}

/// A generative head: method, schedule and field network(s).
///
/// The variant layout enforces the net-count rule by construction: the
/// interpolant head carries exactly two nets, every other head exactly one.
#[derive(Debug, Clone)]
pub enum GenerativeHead {
    Ddpm {
        sched: DdpmSchedule,
        net: FieldNet,
    },
    Sgm {
        vp: VpSde,
        net: FieldNet,
    },
    Fm {
        sigma_min: f64,
        net: FieldNet,
    },
    Si {
        sched: InterpolantSchedule,
        /// Diffuse from pure noise instead of the conditioning source.
        vanilla: bool,
        velocity: FieldNet,
        noise: FieldNet,
    },
}

impl GenerativeHead {
    pub fn kind(&self) -> HeadKind {
        match self {
            GenerativeHead::Ddpm { .. } => HeadKind::Ddpm,
            GenerativeHead::Sgm { .. } => HeadKind::Sgm,
            GenerativeHead::Fm { .. } => HeadKind::Fm,
            GenerativeHead::Si { .. } => HeadKind::Si,
        }
    }

    /// Identity string used in configs and result tables.
    pub fn identity(&self) -> String {
        match self {
            GenerativeHead::Ddpm { sched, .. } => sched.identity(),
            GenerativeHead::Sgm { .. } => "sgm".into(),
            GenerativeHead::Fm { .. } => "fm".into(),
            GenerativeHead::Si { sched, .. } => sched.identity(),
        }
    }

    /// All nets owned by this head.
    pub fn nets(&self) -> Vec<&FieldNet> {
        match self {
            GenerativeHead::Ddpm { net, .. }
            | GenerativeHead::Sgm { net, .. }
            | GenerativeHead::Fm { net, .. } => vec![net],
            GenerativeHead::Si {
                velocity, noise, ..
            } => vec![velocity, noise],
        }
    }

    /// State dimension the head models.
    pub fn input_dim(&self) -> usize {
        self.nets()[0].cfg().input_dim
    }

    /// Condition width the nets expect (0 = unconditional).
    pub fn cond_dim(&self) -> usize {
        self.nets()[0].cfg().cond_dim
    }

    /// Register every net's parameters.
    pub fn init_params(
        &self,
        store: &mut ParamStore,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<()> {
        for net in self.nets() {
            net.init_params(store, rng)?;
        }
        Ok(())
    }

    /// Consistency checks shared by the head constructors in this crate:
    /// nets agree on dimensions and, for si, on conditioning.
    pub fn validate(&self) -> Result<()> {
        let nets = self.nets();
        let first = nets[0].cfg();
        for net in &nets[1..] {
            if net.cfg().input_dim != first.input_dim || net.cfg().cond_dim != first.cond_dim {
                return Err(Error::contract(format!(
                    "head nets disagree on dimensions: {:?} vs {:?}",
                    first,
                    net.cfg()
                )));
            }
        }
        if let GenerativeHead::Fm { sigma_min, .. } = self {
            if *sigma_min <= 0.0 {
                return Err(Error::contract(format!(
                    "fm sigma_min must be positive, got {sigma_min}"
                )));
            }
        }
        Ok(())
    }
}

/// A field of diffusion time, state and optional condition.
///
/// `s` carries one time per batch row; `x` is `[B x D]`; `cond`, when
/// present, is `[B x C]`. Implemented by network adapters for real models
/// and by plain closures for closed-form oracles in tests.
pub trait Field {
    fn eval(&self, s: &[f64], x: &Tensor, cond: Option<&Tensor>) -> Result<Tensor>;
}

/// A [`FieldNet`] bound to its parameter store.
pub struct NetField<'a> {
    pub net: &'a FieldNet,
    pub store: &'a ParamStore,
}

impl Field for NetField<'_> {
    fn eval(&self, s: &[f64], x: &Tensor, cond: Option<&Tensor>) -> Result<Tensor> {
        self.net.infer(self.store, x, s, cond)
    }
}

/// Wrap a closure as a [`Field`] (for oracle fields in tests and examples).
pub struct FnField<F>(pub F)
where
    F: Fn(&[f64], &Tensor, Option<&Tensor>) -> Result<Tensor>;

impl<F> Field for FnField<F>
where
    F: Fn(&[f64], &Tensor, Option<&Tensor>) -> Result<Tensor>,
{
    fn eval(&self, s: &[f64], x: &Tensor, cond: Option<&Tensor>) -> Result<Tensor> {
        (self.0)(s, x, cond)
    }
}

/// Score field of the sgm head: `score = -eps_hat / sqrt(1 - m(s)^2)`.
pub struct VpScoreField<'a> {
    pub eps_field: &'a dyn Field,
    pub vp: VpSde,
}

impl Field for VpScoreField<'_> {
    fn eval(&self, s: &[f64], x: &Tensor, cond: Option<&Tensor>) -> Result<Tensor> {
        let mut out = self.eps_field.eval(s, x, cond)?;
        let (b, d) = out.dims2()?;
        for i in 0..b {
            let scale = -1.0 / self.vp.var(s[i]).sqrt();
            for j in 0..d {
                *out.at2_mut(i, j) *= scale;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fieldnet::FieldNetCfg;

    fn net(prefix: &str, cond_dim: usize) -> FieldNet {
        FieldNet::new(
            prefix,
            FieldNetCfg {
                input_dim: 2,
                hidden: 4,
                blocks: 1,
                time_dim: 4,
                cond_dim,
            },
        )
        .unwrap()
    }

    #[test]
    fn solver_config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { steps: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { epsilon: -0.1, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { clip_delta: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { clip_delta: 0.2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn clipped_grid_covers_the_interval_uniformly() {
        let cfg = SolverConfig {
            steps: 4,
            clip_delta: 0.1,
            ..Default::default()
        };
        let g = cfg.clipped_grid();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 0.9);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn head_identities_and_net_counts() {
        use crate::schedules::{DdpmKind, GammaKind, InterpKind};
        let ddpm = GenerativeHead::Ddpm {
            sched: DdpmSchedule::new(DdpmKind::Cosine, 10).unwrap(),
            net: net("d", 0),
        };
        assert_eq!(ddpm.identity(), "ddpm(cosine)");
        assert_eq!(ddpm.nets().len(), 1);

        let si = GenerativeHead::Si {
            sched: InterpolantSchedule::new(InterpKind::Linear, GammaKind::Sqrt),
            vanilla: false,
            velocity: net("b", 0),
            noise: net("z", 0),
        };
        assert_eq!(si.identity(), "si(linear,sqrt)");
        assert_eq!(si.nets().len(), 2);
        assert_eq!(si.kind(), HeadKind::Si);
        si.validate().unwrap();

        let bad = GenerativeHead::Si {
            sched: InterpolantSchedule::new(InterpKind::Linear, GammaKind::Sqrt),
            vanilla: false,
            velocity: net("b", 0),
            noise: net("z", 3),
        };
        assert!(bad.validate().is_err());
    }
}
