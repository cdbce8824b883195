//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: i/o error: {source}")]
    FileIo {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unknown capture magic {magic:#010x}")]
    BadMagic { path: String, magic: u32 },

    #[error("{path}: truncated capture record at byte offset {offset}")]
    Truncated { path: String, offset: u64 },

    #[error("{path}: unsupported link type {link_type}")]
    UnsupportedLinkType { path: String, link_type: u32 },

    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("invalid label rule '{rule}': {message}")]
    LabelRule { rule: String, message: String },

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
