use thiserror::Error;

#[derive(Debug, Error)]
pub enum FasError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("numerical abort: {0}")]
    NumericalAbort(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("external energy: {0}")]
    External(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FasError>;

impl FasError {
    pub(crate) fn shape(expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        FasError::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
