use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} values, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("non-finite value at flat index {0}")]
    NonFiniteValue(usize),
    #[error("file is empty")]
    EmptyFile,
    #[error("unparseable line {0}")]
    UnparseableLine(usize),
    #[error("illegal ground-truth label {0}")]
    IllegalLabel(u8),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal has fewer than two extrema")]
    TooFewExtrema,
    #[error("image has no row or column with two or more extrema")]
    NoExtremaAnywhere,

    #[error("background selection is empty")]
    EmptySelection,
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("covariance is singular even after regularization")]
    SingularCovariance,
    #[error("zero denominator in matched-filter score")]
    ZeroDenominator,
    #[error("pixel coincides with the background mean")]
    DegeneratePixel,

    #[error("ground truth has no plume pixels")]
    NoPositives,
    #[error("ground truth has no background pixels")]
    NoNegatives,

    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("missing key '{0}'")]
    MissingKey(String),
    #[error("unparseable value for '{key}': '{value}'")]
    UnparseableValue { key: String, value: String },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the stage it came from.
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    pub(crate) fn mismatch(left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            left: left.into(),
            right: right.into(),
        }
    }

    /// Process exit code: 2 for input/usage problems, 3 for numeric or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::MalformedHeader(_)
            | Error::TruncatedData { .. }
            | Error::NonFiniteValue(_)
            | Error::EmptyFile
            | Error::UnparseableLine(_)
            | Error::IllegalLabel(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::UnknownKey(_)
            | Error::MissingKey(_)
            | Error::UnparseableValue { .. } => 2,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 3,
        }
    }
}
