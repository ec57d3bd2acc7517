//! Run configuration: a sectioned TOML file in which every key has a
//! default and unknown keys are rejected, so a resolved snapshot written
//! next to the run artifacts replays the run exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::{GenerativeHead, HeadKind, SolverConfig};
use crate::generative::train::TrainConfig;
use crate::nn::fieldnet::{FieldNet, FieldNetCfg};
use crate::nn::lstm::{RnnEncoder, RnnEncoderCfg};
use crate::schedules::{DdpmKind, DdpmSchedule, GammaKind, InterpKind, InterpolantSchedule, VpSde};

/// Which driver pipeline a config runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "synth2d")]
    Synth2d,
    #[serde(rename = "ar-bench")]
    ArBench,
    #[serde(rename = "forecast")]
    Forecast,
}

/// Head selection and network sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Generative head: "ddpm" | "sgm" | "fm" | "si".
    pub head: HeadKind,
    /// Interpolant coefficient family (si only): "linear" | "trig".
    pub interp: InterpKind,
    /// Interpolant latent amplitude (si only): "sqrt" | "quad" | "trig".
    pub gamma: GammaKind,
    /// Diffuse from pure noise instead of the conditioning source (si only).
    pub vanilla: bool,
    /// Discrete beta ladder (ddpm only): "linear" | "cosine".
    pub ddpm_schedule: DdpmKind,
    /// Ladder length (ddpm only); also the ancestral chain length.
    pub ddpm_steps: usize,
    /// Variance-preserving SDE endpoints (sgm only).
    pub beta_min: f64,
    pub beta_max: f64,
    /// Terminal path width (fm only).
    pub sigma_min: f64,
    /// Field network width, residual depth and time-embedding size.
    pub hidden: usize,
    pub blocks: usize,
    pub time_dim: usize,
    /// History encoder size; the conditioning vector has this dimension.
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            head: HeadKind::Si,
            interp: InterpKind::Linear,
            gamma: GammaKind::Sqrt,
            vanilla: false,
            ddpm_schedule: DdpmKind::Linear,
            ddpm_steps: 100,
            beta_min: 0.1,
            beta_max: 20.0,
            sigma_min: 0.01,
            hidden: 48,
            blocks: 2,
            time_dim: 16,
            encoder_hidden: 32,
            encoder_layers: 1,
        }
    }
}

impl ModelSection {
    /// Identity string of the configured schedule, used to key result rows.
    pub fn identity(&self) -> String {
        match self.head {
            HeadKind::Si => InterpolantSchedule::new(self.interp, self.gamma).identity(),
            HeadKind::Ddpm => match self.ddpm_schedule {
                DdpmKind::Linear => "ddpm(linear)".into(),
                DdpmKind::Cosine => "ddpm(cosine)".into(),
            },
            HeadKind::Sgm => "sgm".into(),
            HeadKind::Fm => "fm".into(),
        }
    }

    /// Builds the configured head for `input_dim`-dimensional data with a
    /// conditioning vector of size `cond_dim` (0 for unconditional use).
    pub fn build_head(&self, input_dim: usize, cond_dim: usize) -> Result<GenerativeHead> {
        let net_cfg = FieldNetCfg {
            input_dim,
            hidden: self.hidden,
            blocks: self.blocks,
            time_dim: self.time_dim,
            cond_dim,
        };
        Ok(match self.head {
            HeadKind::Ddpm => GenerativeHead::Ddpm {
                sched: DdpmSchedule::new(self.ddpm_schedule, self.ddpm_steps)?,
                net: FieldNet::new("head.net", net_cfg)?,
            },
            HeadKind::Sgm => GenerativeHead::Sgm {
                vp: VpSde::new(self.beta_min, self.beta_max)?,
                net: FieldNet::new("head.net", net_cfg)?,
            },
            HeadKind::Fm => {
                if !(self.sigma_min > 0.0 && self.sigma_min < 1.0) {
                    return Err(Error::config(format!(
                        "sigma_min must lie in (0, 1), got {}",
                        self.sigma_min
                    )));
                }
                GenerativeHead::Fm {
                    sigma_min: self.sigma_min,
                    net: FieldNet::new("head.net", net_cfg)?,
                }
            }
            HeadKind::Si => GenerativeHead::Si {
                sched: InterpolantSchedule::new(self.interp, self.gamma),
                vanilla: self.vanilla,
                velocity: FieldNet::new("head.velocity", net_cfg)?,
                noise: FieldNet::new("head.noise", net_cfg)?,
            },
        })
    }

    /// Builds the history encoder for `input_dim`-dimensional data.
    pub fn build_encoder(&self, input_dim: usize) -> Result<RnnEncoder> {
        RnnEncoder::new(
            "encoder",
            RnnEncoderCfg {
                input_dim,
                hidden: self.encoder_hidden,
                layers: self.encoder_layers,
            },
        )
    }
}

/// Optimizer budget and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch: usize,
    pub iters: usize,
    /// Root seed; run `r` of `n_runs` uses `seed + r`. Config files cap
    /// this at `i64::MAX` (TOML integers are signed); larger values are
    /// rejected when the snapshot is written or read.
    pub seed: u64,
    /// Independent repetitions aggregated into mean/std entries.
    pub n_runs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            lr: 1e-3,
            batch: 1024,
            iters: 5000,
            seed: 0,
            n_runs: 1,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, run: usize) -> TrainConfig {
        TrainConfig {
            iters: self.iters,
            batch: self.batch,
            lr: self.lr,
            seed: self.seed.wrapping_add(run as u64),
        }
    }
}

/// Integrator settings, minus the seed (seeds are derived per run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub steps: usize,
    pub epsilon: f64,
    pub clip_delta: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            steps: d.steps,
            epsilon: d.epsilon,
            clip_delta: d.clip_delta,
        }
    }
}

impl SolverSection {
    pub fn to_solver(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            steps: self.steps,
            epsilon: self.epsilon,
            clip_delta: self.clip_delta,
            seed,
        }
    }
}

/// Data source selection; which keys matter depends on the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// 2D benchmark name (synth2d).
    pub dataset: String,
    /// Training and held-out evaluation draw sizes (synth2d).
    pub n_train: usize,
    pub n_eval: usize,
    /// Override of the generator's noise level (synth2d); negative keeps
    /// the dataset default.
    pub noise: f64,
    /// Input CSV (forecast). Empty means "not set".
    pub path: String,
    /// Frequency label recorded with loaded series (forecast).
    pub freq: String,
    /// History window length fed to the encoder.
    pub context_len: usize,
    /// Fraction of time steps in the training split (forecast).
    pub split_fraction: f64,
    /// Forecast horizon in steps and sample paths per forecast.
    pub horizon: usize,
    pub n_paths: usize,
    /// Copy the realized future into every sample path instead of sampling
    /// (forecast); pins the score-zero short circuit for metric checks.
    pub oracle_injection: bool,
    /// Generating process (ar-bench): coefficients, innovation scale,
    /// training series length and self-rollout length for refitting.
    pub ar_coeffs: Vec<f64>,
    pub ar_sigma: f64,
    pub ar_len: usize,
    pub ar_rollout: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            dataset: "moons".into(),
            n_train: 10_000,
            n_eval: 2048,
            noise: -1.0,
            path: String::new(),
            freq: "step".into(),
            context_len: 8,
            split_fraction: 0.8,
            horizon: 8,
            n_paths: 100,
            oracle_injection: false,
            ar_coeffs: vec![0.8],
            ar_sigma: 1.0,
            ar_len: 2000,
            ar_rollout: 1500,
        }
    }
}

impl DataSection {
    pub fn noise_override(&self) -> Option<f64> {
        (self.noise >= 0.0).then_some(self.noise)
    }
}

/// Artifact placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into() }
    }
}

/// One experiment run, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSection,
    pub train: TrainSection,
    pub solver: SolverSection,
    pub data: DataSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentKind::Synth2d,
            model: ModelSection::default(),
            train: TrainSection::default(),
            solver: SolverSection::default(),
            data: DataSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        // Flatten toml's multi-line caret diagnostics to one line: keep the
        // message and locate it by line number ourselves.
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].lines().count().max(1);
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            Error::config(format!("bad config{at}: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    /// Serialized resolved snapshot; feeding it back through
    /// [`RunConfig::from_toml_str`] reproduces the config exactly.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("config snapshot: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.hidden == 0 || m.blocks == 0 || m.time_dim == 0 {
            return Err(Error::config("model sizes must be positive"));
        }
        if m.ddpm_steps == 0 {
            return Err(Error::config("ddpm_steps must be positive"));
        }
        let t = &self.train;
        if t.batch == 0 {
            return Err(Error::config("train.batch must be positive"));
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(Error::config(format!("train.lr must be positive, got {}", t.lr)));
        }
        if t.n_runs == 0 {
            return Err(Error::config("train.n_runs must be at least 1"));
        }
        self.solver.to_solver(0).validate().map_err(|e| match e {
            Error::Contract(msg) => Error::Config(msg),
            other => other,
        })?;
        let d = &self.data;
        match self.experiment {
            ExperimentKind::Synth2d => {
                if d.n_train == 0 || d.n_eval == 0 {
                    return Err(Error::config("data.n_train and data.n_eval must be positive"));
                }
            }
            ExperimentKind::ArBench => {
                if d.ar_coeffs.is_empty() {
                    return Err(Error::config("data.ar_coeffs must not be empty"));
                }
                if d.ar_len < 4 * d.context_len || d.ar_rollout < 10 * d.ar_coeffs.len() {
                    return Err(Error::config(
                        "data.ar_len / data.ar_rollout too short for the context and refit order",
                    ));
                }
            }
            ExperimentKind::Forecast => {
                if d.path.is_empty() {
                    return Err(Error::config("forecast runs need data.path"));
                }
                if !(d.split_fraction > 0.0 && d.split_fraction < 1.0) {
                    return Err(Error::config(format!(
                        "data.split_fraction must lie in (0, 1), got {}",
                        d.split_fraction
                    )));
                }
                if d.horizon == 0 || d.n_paths == 0 {
                    return Err(Error::config("data.horizon and data.n_paths must be positive"));
                }
            }
        }
        if d.context_len == 0 {
            return Err(Error::config("data.context_len must be positive"));
        }
        if !(d.ar_sigma >= 0.0 && d.ar_sigma.is_finite()) {
            return Err(Error::config(format!(
                "data.ar_sigma must be finite and >= 0, got {}",
                d.ar_sigma
            )));
        }
        Ok(())
    }

    /// Desk-scale fast-iteration preset for the AR recovery benchmark.
    pub fn ar_bench_desk() -> RunConfig {
        RunConfig {
            experiment: ExperimentKind::ArBench,
            model: ModelSection {
                ddpm_schedule: DdpmKind::Cosine,
                encoder_hidden: 16,
                ..ModelSection::default()
            },
            train: TrainSection {
                iters: 10_000,
                batch: 256,
                ..TrainSection::default()
            },
            solver: SolverSection {
                steps: 50,
                ..SolverSection::default()
            },
            data: DataSection {
                context_len: 2,
                ..DataSection::default()
            },
            ..RunConfig::default()
        }
    }

    /// Desk-scale preset for forecasting from a CSV at `path`.
    pub fn forecast_desk(path: impl Into<String>) -> RunConfig {
        RunConfig {
            experiment: ExperimentKind::Forecast,
            train: TrainSection {
                iters: 2000,
                batch: 256,
                ..TrainSection::default()
            },
            data: DataSection {
                path: path.into(),
                ..DataSection::default()
            },
            ..RunConfig::default()
        }
    }
}
