use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid vocabulary coverage {0}: expected 0 < P <= 100")]
    InvalidCoverage(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("embedding dimension mismatch: expected {expected}, found {found} (line {line})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: usize,
    },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("token index {index} out of range for vocabulary of size {size}")]
    InvalidIndex { index: usize, size: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("AUC undefined: need at least one positive and one negative example")]
    AucUndefined,

    #[error("length mismatch: {left} gold labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("no examples to evaluate")]
    EmptyEvaluation,

    #[error("no intervals to train on")]
    NoIntervals,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from bad input data rather than from a bug or
    /// the environment. Drives the CLI exit code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyCorpus
                | Error::Parse { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidIndex { .. }
                | Error::UnknownLabel(_)
                | Error::AucUndefined
                | Error::EmptyDataset
                | Error::NoIntervals
                | Error::Checkpoint(_)
                | Error::TaskMismatch(_)
                | Error::LengthMismatch { .. }
                | Error::EmptyEvaluation
        )
    }
}
