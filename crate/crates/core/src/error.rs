use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("{path}: header mismatch: {detail}")]
    Header { path: PathBuf, detail: String },

    #[error("row {row}, column {column}: {detail}")]
    Cell { row: usize, column: String, detail: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid binarization policy: {0}")]
    Policy(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("rule {rule} references undefined condition id {id} (vocabulary has {len})")]
    UndefinedCondition { rule: usize, id: usize, len: usize },

    #[error("unsupported model file version {0}")]
    Version(u32),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("GAM conversion exceeded the leaf cap of {cap}; use coarser bins or raise the cap")]
    LeafCap { cap: usize },

    #[error("brute force would enumerate {subsets} subsets (cap {cap})")]
    EnumerationCap { subsets: u128, cap: u128 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
