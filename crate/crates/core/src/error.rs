use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no such file: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image: {0}")]
    CorruptImage(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("grid mismatch: expected {expected} bands, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("unknown blob id {0}")]
    UnknownBlobId(u32),

    #[error("box ({x},{y},{w},{h}) lies outside the {width}x{height} page")]
    OutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class {0:?} has no training samples")]
    EmptyClass(String),

    #[error("original text is empty")]
    EmptyOriginal,

    #[error("training corpus needs at least two classes")]
    SingleClass,

    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("document {0:?} has no class label")]
    MissingLabel(String),

    #[error("class {0:?} is not known to the model")]
    UnknownClass(String),

    #[error("unlabeled blobs: {0:?}")]
    UnlabeledBlob(Vec<u32>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
