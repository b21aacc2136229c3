use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("invalid sampling request: {0}")]
    Sampling(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid loss specification: {0}")]
    Loss(String),

    #[error("non-finite loss while training {network} (epoch {epoch})")]
    Diverged { network: String, epoch: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
