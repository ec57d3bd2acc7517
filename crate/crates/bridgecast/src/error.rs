//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants are grouped
//! by failure domain so the CLI can map them onto stable process exit codes
//! (see [`Error::exit_code`]): configuration problems exit 2, data problems
//! exit 3 and numerical divergence exits 4.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two tensors (or a tensor and an expected shape) disagree.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An API contract was violated (bad argument, wrong call order, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A user-facing configuration file or flag is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// An input file could not be parsed.
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Generated or loaded data violates a documented requirement.
    #[error("data error: {0}")]
    Data(String),

    /// An SDE/ODE solver produced a non-finite state.
    #[error("solver diverged at step {step}: {msg}")]
    SolverDiverged { step: usize, msg: String },

    /// A training loop produced a non-finite loss or parameter.
    #[error("training diverged at iteration {iter}: loss {loss}")]
    TrainingDiverged { iter: usize, loss: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Convenience constructor for [`Error::Contract`].
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Convenience constructor for [`Error::Config`].
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI uses for this error class.
    ///
    /// 2 = configuration, 3 = data / IO, 4 = numerical divergence. Internal
    /// contract violations also exit 2 since they are invariably caused by
    /// an inconsistent run setup.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::ShapeMismatch { .. } => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Io { .. } => 3,
            Error::SolverDiverged { .. } | Error::TrainingDiverged { .. } => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(Error::config("x").exit_code(), 2);
        assert_eq!(Error::contract("x").exit_code(), 2);
        assert_eq!(
            Error::Parse {
                path: "f.csv".into(),
                line: 3,
                msg: "bad".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(
            Error::SolverDiverged {
                step: 7,
                msg: "nan".into()
            }
            .exit_code(),
            4
        );
        assert_eq!(
            Error::TrainingDiverged { iter: 1, loss: f64::NAN }.exit_code(),
            4
        );
    }

    #[test]
    fn display_includes_location() {
        let e = Error::Parse {
            path: "data/train.csv".into(),
            line: 42,
            msg: "not a number: \"abc\"".into(),
        };
        let s = e.to_string();
        assert!(s.contains("train.csv"));
        assert!(s.contains("line 42"));
    }
}
