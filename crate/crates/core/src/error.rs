use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum SztError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("value outside the domain of {op}: {detail}")]
    OutOfDomain { op: &'static str, detail: String },

    #[error("stochastic rounding requires a random source")]
    MissingRandomness,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("path did not escape after {steps} steps (last state {last_state}, barrier {barrier})")]
    NonEscape {
        steps: u64,
        last_state: f64,
        barrier: f64,
    },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: u64, loss: f64 },

    #[error("malformed .szt data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SztError>;

pub(crate) fn ensure_finite(op: &'static str, name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(SztError::InvalidInput(format!("{op}: {name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(op: &'static str, name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SztError::InvalidInput(format!("{op}: {name} must be a positive finite number, got {value}")))
    }
}
