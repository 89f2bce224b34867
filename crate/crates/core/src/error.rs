use std::path::PathBuf;

use crate::solver::SolverState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    /// The iteration produced a non-finite iterate or a loss above the
    /// divergence threshold. `last` is the last state whose loss was finite.
    #[error("solver diverged at iteration {iter}")]
    Divergence { iter: usize, last: Box<SolverState> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("activation {0} is not twice differentiable; this diagnostic requires a smooth activation")]
    SmoothnessRequired(String),

    #[error("quantity undefined at the optimum (distance to ground truth is {0:e})")]
    UndefinedAtOptimum(f64),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
