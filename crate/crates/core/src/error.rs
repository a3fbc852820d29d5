use thiserror::Error;

use crate::autodiff::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("gimbal lock: pitch {pitch} rad is within 1e-6 of ±π/2")]
    GimbalLock { pitch: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },
    #[error("non-finite loss at step {step}: {source}")]
    NonFiniteLoss { step: usize, source: TensorError },
    #[error("training diverged at epoch {epoch}; last good checkpoint kept")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
