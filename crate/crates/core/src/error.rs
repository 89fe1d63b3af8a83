use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: wrong dimension, zero denominators, empty grids.
    #[error("invalid input: {0}")]
    Input(String),

    /// A lattice model that cannot define a Hermitian periodic operator.
    #[error("model error: {0}")]
    Model(String),

    /// A finite patch that is too small for the requested evaluation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A broken precondition such as a non-Hermitian fiber or missing eigenvectors.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure at a specific grid point, with its torus coordinates attached.
    #[error("at k = {k:?}: {source}")]
    AtPoint {
        k: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
