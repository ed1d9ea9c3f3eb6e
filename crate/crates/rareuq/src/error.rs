use thiserror::Error;

use crate::cross_entropy::CeIterate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty data")]
    EmptyData,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("performance function '{name}' failed on sample {sample:?}: {message}")]
    PerfEvaluation {
        name: String,
        sample: Vec<f64>,
        message: String,
    },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("replicate {replicate}: {rejections} consecutive draws violated parameter constraints")]
    ResamplingStuck { replicate: usize, rejections: usize },

    #[error("cross-entropy search stalled: no level progress over the last 10 of {} iterations", trajectory.len())]
    CeStalled { trajectory: Vec<CeIterate> },

    #[error("row {row}, column {column}: {message}")]
    CsvRecord {
        row: usize,
        column: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
