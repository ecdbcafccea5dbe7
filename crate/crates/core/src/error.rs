use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root-finder or fixed-point iteration did not converge.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Malformed dispersion table or stream file.
    #[error("format error: {0}")]
    Format(String),

    /// An estimator could not be evaluated on the supplied data.
    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }

    /// Validation errors map to exit status 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Domain(_))
    }
}
