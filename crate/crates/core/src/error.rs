use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("models must share a vocabulary")]
    VocabMismatch,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDist(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("unknown baseline `{0}`")]
    UnknownBaseline(String),

    #[error("remote scorer: {0}")]
    Remote(String),

    #[error("malformed scorer response: {reason}; body: {body}")]
    MalformedResponse { reason: String, body: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
