use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed input bytes.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    /// A gradient was requested within one pixel of the field boundary.
    #[error("point ({x}, {y}) lies in the one-pixel border")]
    Border { x: f64, y: f64 },
    /// Input that makes the result undefined, such as a zero-norm descriptor.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Arguments that do not fit together, such as mismatched axes.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Matching produced no usable score.
    #[error("matching failed: {0}")]
    Matching(String),
    /// A checked precondition of an algorithm does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
