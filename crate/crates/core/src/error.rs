use std::io;

use thiserror::Error;

use crate::quantize::ScalarQuantizer;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A covariance or information matrix lost positive definiteness, or a
    /// likelihood underflowed.
    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("Lloyd-Max did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        last: Box<ScalarQuantizer>,
    },

    /// Input that is well formed but outside what a closed form covers.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code for this error class: 1 validation, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Unsupported(_) | Error::Config(_) => 1,
            Error::Numerical(_) | Error::NotConverged { .. } => 2,
            Error::Io(_) => 3,
        }
    }
}
