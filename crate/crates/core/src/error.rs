//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type CoreResult<T> = Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error in {path} at line {line}: {msg}")]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Retriable network failure; carries the query that failed.
    #[error("network failure for query {query:?}: {msg}")]
    Network { query: String, msg: String },

    /// A response arrived but could not be parsed; carries a payload excerpt.
    #[error("malformed response ({msg}); payload excerpt: {excerpt:?}")]
    MalformedResponse { msg: String, excerpt: String },

    #[error("backend error (status {status}): {msg}")]
    Backend { status: u16, msg: String },

    /// The mock backend has no scripted completion for this prompt.
    #[error("fixture miss for prompt hash {hash}")]
    FixtureMiss { hash: String },

    #[error("dimension mismatch: index dim {index_dim}, provider dim {provider_dim}")]
    DimMismatch { index_dim: u32, provider_dim: u32 },

    #[error("data error: {0}")]
    Data(String),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        CoreError::Schema {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 backend, 4 data/schema.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Config(_) => 2,
            CoreError::Network { .. } | CoreError::Backend { .. } | CoreError::FixtureMiss { .. } => 3,
            CoreError::Io { .. }
            | CoreError::Schema { .. }
            | CoreError::MalformedResponse { .. }
            | CoreError::DimMismatch { .. }
            | CoreError::Data(_) => 4,
        }
    }
}
