use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("no descriptor or entry for id `{0}`")]
    UnknownId(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("degenerate descriptor for `{image_id}`: zero norm")]
    DegenerateDescriptor { image_id: String },

    #[error("whitening model expects dim {expected}, got {actual}")]
    ModelDimMismatch { expected: usize, actual: usize },

    #[error("whitening needs at least 2 training descriptors, got {0}")]
    InsufficientSamples(usize),

    #[error("average precision undefined: query `{0}` has no positives")]
    EmptyPositives(String),

    #[error("malformed ground truth: {0}")]
    MalformedGroundTruth(String),

    #[error("vector {0} has zero variance")]
    ZeroVariance(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{} image(s) failed: {}", .0.len(), summarize_failures(.0))]
    Batch(Vec<(String, Error)>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn summarize_failures(failures: &[(String, Error)]) -> String {
    failures
        .iter()
        .map(|(id, e)| format!("{id}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (arguments, configuration)
    /// rather than by the data being processed.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::ModelDimMismatch { .. }
        )
    }
}
