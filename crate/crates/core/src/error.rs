use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("input too short: need at least {needed} samples, got {got}")]
    Length { needed: usize, got: usize },

    #[error("dimension mismatch at layer {layer}: expected {expected}, got {got}")]
    Dimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("noise signal has zero power")]
    DegenerateNoise,

    #[error("missing input: {0}")]
    Input(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported file version: expected {expected:?}, found {found:?}")]
    Version { expected: String, found: String },

    #[error("word error rate is undefined for an empty reference")]
    UndefinedWer,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                Error::Format(format!("truncated wav: {e}"))
            }
            hound::Error::IoError(e) => Error::Io(e),
            hound::Error::Unsupported => Error::Unsupported("wav encoding".into()),
            other => Error::Format(other.to_string()),
        }
    }
}
