use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QcdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("derivative order {order} exceeds the configured maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("node {index} lies outside the admissible window [{lo}, {hi}]")]
    OutOfWindow { index: usize, lo: usize, hi: usize },

    #[error("window h = {h} must span at least two grid steps (dt = {dt})")]
    WindowTooSmall { h: f64, dt: f64 },

    #[error("t = {t} lies past the near-expiry cutoff T - eps = {limit}")]
    Cutoff { t: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, QcdError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QcdError::InvalidArgument(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QcdError::Domain(msg.into()))
}
