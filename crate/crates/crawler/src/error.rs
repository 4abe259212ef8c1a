use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("network access denied for {0}")]
    Denied(String),
    #[error("no fixture record {}", .0.display())]
    MissingFixture(PathBuf),
    #[error("request {url} failed: {msg}")]
    Network { url: String, msg: String },
    #[error("request {url} returned HTTP {status} after {attempts} attempts")]
    Status { url: String, status: u16, attempts: u32 },
    #[error("malformed response for {key}: {msg}")]
    Malformed { key: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = CrawlError> = std::result::Result<T, E>;

pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CrawlError {
    CrawlError::Io {
        path: path.into(),
        source,
    }
}
