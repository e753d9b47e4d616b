use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sample {0} has no label")]
    MissingLabel(usize),

    #[error("AUC is undefined for a single-class dataset")]
    SingleClass,

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("non-finite loss evaluation")]
    NonFinite,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
