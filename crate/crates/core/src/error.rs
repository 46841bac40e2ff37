use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid Cholesky point: {0}")]
    InvalidPoint(String),

    #[error("tangent vector is not based at the given point")]
    BaseMismatch,

    #[error("empty input")]
    EmptyInput,

    #[error("channel {channel} has zero variance")]
    ZeroVarianceChannel { channel: usize },

    #[error("invalid trial: {0}")]
    InvalidTrial(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class {label} has no training points")]
    EmptyClass { label: u32 },

    #[error("SMO did not converge for class pair ({a}, {b}): KKT residual {residual:e}")]
    NonConvergence { a: u32, b: u32, residual: f64 },

    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("reference subject {subject} has no trials for gesture {gesture}")]
    MissingReferenceGesture { subject: u32, gesture: u32 },

    #[error("reference subject {0} is not present in the dataset")]
    MissingReferenceSubject(u32),

    #[error("bad distance matrix: {0}")]
    BadDistanceMatrix(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Pipeline {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps an error with the file or item that produced it.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Pipeline {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 validation, 3 data, 4 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Pipeline { source, .. } => source.exit_code(),
            Error::NonConvergence { .. } => 4,
            Error::DimensionMismatch { .. }
            | Error::NotSquare { .. }
            | Error::NotSymmetric { .. }
            | Error::InvalidPoint(_)
            | Error::BaseMismatch
            | Error::EmptyInput
            | Error::InvalidConfig(_)
            | Error::KTooLarge { .. }
            | Error::LengthMismatch { .. }
            | Error::InvalidSplit(_)
            | Error::MissingReferenceSubject(_) => 2,
            Error::NotPositiveDefinite { .. }
            | Error::ZeroVarianceChannel { .. }
            | Error::InvalidTrial(_)
            | Error::EmptyClass { .. }
            | Error::MissingReferenceGesture { .. }
            | Error::BadDistanceMatrix(_)
            | Error::Io { .. }
            | Error::Format { .. } => 3,
        }
    }
}
