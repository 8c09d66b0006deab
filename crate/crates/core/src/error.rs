use thiserror::Error;

/// Errors raised anywhere in the reconstruction pipeline.
///
/// Solver failures carry the stage that produced them so that a failed run
/// can be traced back without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at node {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{stage}: iteration did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("|g| = {magnitude:.3e} below floor at boundary node {node:?}")]
    DataFloor { node: [usize; 3], magnitude: f64 },

    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wrap an error with the name of the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::NotConverged { .. } => e,
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
