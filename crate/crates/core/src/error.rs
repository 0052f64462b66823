use thiserror::Error;

/// Errors raised while building, certifying or running an engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {dim} exceeds the maximum total dimension {max}")]
    Size { dim: usize, max: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("erasure failed: {0}")]
    Erasure(String),

    #[error("certification failed: {0}")]
    Certification(String),

    /// A relation that must hold for every valid input was violated. This
    /// always signals a bug, never bad input.
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }

    /// Hard failures abort a batch; everything else is reported per run.
    pub fn is_hard(&self) -> bool {
        matches!(self, Error::Inconsistency(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
