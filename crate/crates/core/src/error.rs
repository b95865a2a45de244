use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("ellipticity violation: {0}")]
    Ellipticity(String),

    #[error("simulation diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("degenerate reflection direction (|xi| = {norm:e}); coupling must be declared first")]
    DegenerateDirection { norm: f64 },

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::linalg::MAX_DIM)]
    Dimension(usize),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoreError::Validation(msg.into()))
}
