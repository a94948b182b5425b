//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by trace construction, simulation, and the CLI plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("arrival time at index {index} ({value}) precedes its predecessor")]
    UnsortedTrace { index: usize, value: f64 },

    #[error("arrival time at index {index} is not finite and nonnegative: {value}")]
    BadArrivalTime { index: usize, value: f64 },

    #[error("invalid bucket parameters: {reason}")]
    BadBucketParams { reason: String },

    #[error("invalid split specification: {0}")]
    InvalidSplit(String),

    #[error("assignment length {assignment} does not match trace length {trace}")]
    AssignmentLength { assignment: usize, trace: usize },

    #[error("bucket ordinal {ordinal} out of range for {k} sub-buckets")]
    BucketOrdinal { ordinal: usize, k: usize },

    #[error("policy `{policy}` requires simulation state and cannot assign offline")]
    OnlineOnlyPolicy { policy: String },

    #[error("invalid generator spec: {reason}")]
    BadGeneratorSpec { reason: String },

    #[error("{path}:{line}: {reason}")]
    TraceFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
