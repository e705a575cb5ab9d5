use std::path::PathBuf;

use netuq::ErrorKind;
use thiserror::Error;

/// Exit code for configuration and I/O problems.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code for solver nonconvergence and other numerical failures.
pub const EXIT_SOLVER: i32 = 2;
/// Exit code for basis-reduction and modified-quadrature failures.
pub const EXIT_REDUCTION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot encode output: {0}")]
    Encode(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Library(#[from] netuq::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Read { .. }
            | CliError::Write { .. }
            | CliError::Encode(_) => EXIT_CONFIG,
            CliError::NonFinite(_) => EXIT_SOLVER,
            CliError::Library(e) => match e.kind() {
                ErrorKind::Argument => EXIT_CONFIG,
                ErrorKind::Solver => EXIT_SOLVER,
                ErrorKind::Reduction => EXIT_REDUCTION,
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Encode(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Encode(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
