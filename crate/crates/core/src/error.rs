use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("IoU is undefined: both masks are empty")]
    UndefinedIoU,

    #[error("parse error in {what} at line {line}, offset {offset}: {message}")]
    Parse {
        what: String,
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("room generation failed: {0}")]
    Generation(String),

    #[error("augmentation failed: {0}")]
    Augmentation(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("training diverged at epoch {epoch}, batch {batch}: {term} is {value}")]
    Diverged {
        epoch: usize,
        batch: usize,
        term: &'static str,
        value: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("resolution mismatch: model expects {expected:?}, got {got:?}")]
    ResolutionMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("missing boundary map for layout {0}")]
    MissingBoundaryMap(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        what: impl Into<String>,
        line: usize,
        offset: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            offset,
            message: message.into(),
        }
    }
}
