//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("initialization error: {0}")]
    Init(String),

    /// Iteration budget exhausted before the tolerance was met. Carries the
    /// last iterate so callers can inspect or resume.
    #[error("no convergence after {iterations} iterations (last delta {last_delta:e})")]
    Convergence {
        iterations: usize,
        last_delta: f64,
        last_iterate: Vec<f64>,
    },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
