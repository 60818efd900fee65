//! Command-line front end for the photonet toolkit: TOML scenario
//! configurations, deterministic seeding, CSV/report outputs, and the
//! headline-number reproduction table.

pub mod config;
pub mod output;
pub mod presets;
pub mod reproduce;
pub mod scenarios;

use std::process::ExitCode;

/// Errors carrying the process exit code contract: 2 for configuration
/// and validation problems, 3 for convergence or insufficient-data
/// failures at run time.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl From<photonet_core::Error> for CliError {
    fn from(err: photonet_core::Error) -> Self {
        use photonet_core::Error as E;
        match err {
            E::Singular(_) | E::InsufficientData(_) | E::Convergence(_) => {
                CliError::Runtime(err.to_string())
            }
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
