use std::path::PathBuf;

use crate::fem::solve::SolveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid microstructure: {0}")]
    InvalidSpec(String),

    #[error("geometry check failed: {0}")]
    Geometry(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("invalid elasticity tensor: {0}")]
    Tensor(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("inconsistent inputs: {0}")]
    Mismatch(String),

    #[error("tensor audit failed: {0}")]
    Audit(String),

    #[error("initial data violates {constraint}: max |value| = {magnitude:.3e}")]
    Projection { constraint: String, magnitude: f64 },

    #[error("expression error in `{expr}`: {message}")]
    Expression { expr: String, message: String },

    #[error(transparent)]
    Solve(#[from] SolveError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
