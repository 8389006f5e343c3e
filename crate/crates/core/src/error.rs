use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("block covariance is numerically singular (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid action {action}: must be 0 or the preselected arm {arm}")]
    InvalidAction { action: usize, arm: usize },

    #[error("propensity {0} outside the open interval (0, 1)")]
    InvalidPropensity(f64),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("unit {0} has no fold assignment")]
    UnassignedUnit(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trace and ground truth are misaligned: {0}")]
    Misaligned(String),

    #[error("unknown policy tag `{0}`")]
    UnknownPolicy(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
