use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema: {0}")]
    Schema(String),

    #[error("header mismatch at column {position}: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("row {row}, column {column:?}: unknown category {value:?}")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column:?}: malformed number {value:?}")]
    MalformedNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has no rows")]
    NoRows,

    #[error("attribute {attribute:?}: value required but missing")]
    MissingValue { attribute: String },

    #[error("attribute {0:?} has no observed values")]
    AllMissing(String),

    #[error("evidence is empty: personalization vector would sum to zero")]
    EmptyEvidence,

    #[error("{0}: centrality block sums to zero")]
    ZeroBlock(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("object index {index} out of range (dataset has {len} rows)")]
    ObjectOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("model file version {0} is not supported")]
    UnsupportedVersion(u32),

    #[error("dataset digest mismatch: model expects {expected}, file has {found}")]
    DigestMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
