use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the trust model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument fell outside the domain of a function.
    #[error("{function}: argument {value} outside domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Model parameters violate their constraints.
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A trajectory violates its structural invariants.
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    /// An iterative numeric routine did not converge.
    #[error("{0} did not converge")]
    NonConvergence(&'static str),

    /// The objective was not finite where it had to be.
    #[error("non-finite log-likelihood: {0}")]
    NonFinite(String),

    /// Not enough data to compute the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Experiment configuration rejected.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A data row failed validation. `line` is the 1-based line in the file, header included.
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// True for errors caused by bad input (as opposed to I/O or numeric failure).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::InvalidParameter { .. }
                | Error::MalformedTrajectory(_)
                | Error::InsufficientData(_)
                | Error::Config(_)
                | Error::Row { .. }
                | Error::Parse { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
