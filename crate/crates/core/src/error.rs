use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("estimation failed for {method} ({tuning}): {reason}")]
    EstimationFailed {
        method: String,
        tuning: String,
        reason: String,
    },

    #[error("individual {row}: every draw has a non-finite log-likelihood")]
    DegenerateIndividual { row: usize },

    #[error("sampler could not find a finite initial state after {attempts} attempts")]
    Initialization { attempts: usize },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True when the failure is numerical rather than a data or usage problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EstimationFailed { .. }
                | Error::DegenerateIndividual { .. }
                | Error::Initialization { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
