//! Conditional stochastic-interpolant generative modeling for probabilistic
//! multivariate time-series forecasting, with diffusion and flow-matching
//! baselines behind one head interface.

pub mod config;
pub mod data;
pub mod error;
pub mod forecaster;
pub mod generative;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod runner;
pub mod schedules;
pub mod special;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
