use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text input (pattern CSV, JSON) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("feed offset {offset:.6} m is outside the lens field (focal length {focal_length:.6} m)")]
    OutOfField { offset: f64, focal_length: f64 },

    /// Tone estimation did not have enough SNR to be trusted.
    #[error("estimation unreliable: {0}")]
    EstimationUnreliable(String),

    #[error("not a valid I/Q imbalance: image is at least as strong as the signal")]
    InvalidImbalance,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
