use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("patch {width}x{height} is too small, both sides must be at least 4 pixels")]
    PatchTooSmall { width: usize, height: usize },

    #[error("covariance needs at least 2 samples, got {0}")]
    DegeneratePatch(usize),

    #[error("kernel bandwidth must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("class {0} has no labeled player")]
    MissingClass(usize),

    #[error("invalid label assignment: {0}")]
    InvalidAssignment(String),

    #[error("instance too large for exhaustive enumeration: {unlabeled} unlabeled players, {classes} classes")]
    InstanceTooLarge { unlabeled: usize, classes: usize },

    #[error("{path}:{line}: malformed annotation: {reason}")]
    MalformedAnnotation { path: PathBuf, line: usize, reason: String },

    #[error("detection {index} (frame {frame}) does not fit inside its frame")]
    BBoxOutOfFrame { index: usize, frame: u32 },

    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },

    #[error("cannot label {requested} frames, only {available} frames contain detections")]
    KTooLarge { requested: usize, available: usize },

    #[error("target {target} is not in 1..={num_targets}")]
    UnknownTarget { target: u32, num_targets: u32 },

    #[error("detection {0} has no ground-truth identity")]
    MissingGroundTruth(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
