use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("accuracy target not reached for {what} (best estimate {estimate})")]
    Accuracy { what: String, estimate: f64 },
    #[error("regime error: {0}")]
    Regime(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("third-order moments h30, h21, h12, h03 are required")]
    MissingThirdMoments,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(domain(format!("{name} must be finite, got {x}")))
    }
}
