use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("rating {value} for {dimension} is outside 1..=5")]
    RatingOutOfRange { dimension: &'static str, value: i64 },

    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: (usize, usize), goal: (usize, usize) },

    #[error("pose ({x:.3}, {y:.3}) is not on a traversable cell")]
    BlockedPose { x: f64, y: f64 },

    #[error("feature set {0} is not supported by this model")]
    InvalidFeatureSet(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch { what: &'static str, expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid sample {sample_id}: {reason}")]
    InvalidSample { sample_id: String, reason: String },

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: record {record}: field `{field}`: {message}")]
    Schema { path: String, record: usize, field: String, message: String },

    #[error("{path}: {count} invalid records:\n{details}")]
    Records { path: String, count: usize, details: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    VersionMismatch { what: &'static str, found: u32, expected: u32 },

    #[error("unknown sample id `{0}`")]
    UnknownSample(String),

    #[error("{context}: {source}")]
    Io { context: String, #[source] source: std::io::Error },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { context: path.into().display().to_string(), source }
    }

    /// Errors caused by bad input data rather than by a bug or environment problem.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
