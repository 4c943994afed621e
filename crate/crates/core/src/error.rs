use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x}, {y}, {w}, {h}): width and height must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    EmbeddingDimension { expected: usize, actual: usize },

    #[error("malformed embedding: {0}")]
    MalformedEmbedding(String),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("innovation covariance is singular; check the observation/process noise configuration")]
    SingularInnovation,

    #[error("cost matrix entry ({row}, {col}) = {value} is not a non-negative cost or +inf")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("brute-force assignment limited to min(rows, cols) <= {limit}, got {rows}x{cols}")]
    OracleLimit { rows: usize, cols: usize, limit: usize },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("bounding box lies completely outside the {width}x{height} frame")]
    UnusableDetection { width: usize, height: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("timestamps out of order: step at {now}s after previous step at {previous}s")]
    TimestampOrder { previous: f64, now: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("detections carry no ground-truth provenance")]
    MissingProvenance,

    #[error("invalid detection rate: {0}")]
    InvalidRate(String),

    #[error("ground truth is empty; metrics are undefined")]
    EmptyGroundTruth,

    #[error("result frames {first}..={last} fall outside ground-truth frames {gt_first}..={gt_last}")]
    FrameRange { first: u32, last: u32, gt_first: u32, gt_last: u32 },

    #[error("id {id} appears more than once in frame {frame}")]
    DuplicateId { frame: u32, id: i64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
