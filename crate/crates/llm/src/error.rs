use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no recorded response for `{tag}` request {hash}")]
    MissingTranscript { tag: String, hash: String },
    #[error("transport error after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LlmError {
        let path = path.into();
        move |source| LlmError::Io { path, source }
    }
}

/// No JSON value could be recovered from a completion.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no parseable JSON in completion: {message}")]
pub struct ExtractionError {
    pub message: String,
    pub raw: String,
}
