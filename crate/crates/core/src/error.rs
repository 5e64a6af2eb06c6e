use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds what an exact algorithm can handle.
    #[error("capability error: {0}")]
    Capability(String),

    /// Malformed or incomplete input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    /// An evaluator broke its interface contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
