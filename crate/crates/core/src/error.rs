use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("dataset has no labels")]
    Unlabeled,
    #[error("not an embedding file")]
    NotEmbeddingFile,
    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated embedding file: {0}")]
    Truncated(String),
    #[error("ragged CSV: row {row} has {found} fields, expected {expected}")]
    RaggedCsv { row: usize, expected: usize, found: usize },
    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("undefined cosine (zero mean vector)")]
    UndefinedCosine,
    #[error("undefined correlation (constant vector)")]
    UndefinedCorrelation,
    #[error("degenerate component (zero lambda at direction {0})")]
    DegenerateComponent(usize),
    #[error("zero-trace projected covariance")]
    ZeroTrace,
    #[error("nonpositive projected variance at direction {0}")]
    NonpositiveVariance(usize),
    #[error("degenerate decoy distribution")]
    DegenerateDecoy,

    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("seller replied with error: {0}")]
    Remote(String),
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("connection refused by {0}")]
    ConnectionRefused(String),

    #[error("single-class training set")]
    SingleClass,
    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
