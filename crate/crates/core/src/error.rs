use std::path::PathBuf;

/// Errors raised across the solver, sampling and persistence layers.
#[derive(Debug, thiserror::Error)]
pub enum PgdmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The iteration budget ran out; carries the best iterate seen.
    #[error("no convergence after {iterations} iterations (residual norm {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// A time-stepping solve failed at step `step` (1-based).
    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<PgdmError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training failed at step {step}: {reason}")]
    Training { step: usize, reason: String },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl PgdmError {
    /// The innermost error, looking through time-step wrappers.
    pub fn root(&self) -> &PgdmError {
        match self {
            PgdmError::Step { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PgdmError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PgdmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        PgdmError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = PgdmError> = std::result::Result<T, E>;
