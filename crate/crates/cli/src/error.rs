use std::path::Path;

use thiserror::Error;

/// CLI failures, each tied to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<qroulette::Error> for CliError {
    fn from(err: qroulette::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Numerical(err.to_string())
        }
    }
}
