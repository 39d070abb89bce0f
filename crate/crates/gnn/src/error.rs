use crate::train::EpochLosses;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] graphvar_core::Error),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize, curves: Vec<EpochLosses> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
