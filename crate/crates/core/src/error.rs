use thiserror::Error;

/// Errors produced anywhere in the pulse-design pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The invariant inversion could not produce finite controls.
    #[error("synthesis failure at t = {t}: {reason}")]
    SynthesisFailure { t: f64, reason: String },

    #[error("numeric failure: {reason} (achieved error {achieved:e})")]
    NumericFailure { reason: String, achieved: f64 },

    #[error("optimization failure: {0}")]
    OptimizationFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl StaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(reason: impl Into<String>, achieved: f64) -> Self {
        Self::NumericFailure {
            reason: reason.into(),
            achieved,
        }
    }
}

impl From<std::io::Error> for StaError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for StaError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, StaError>;
