//! Error type with process exit-code semantics.

use thiserror::Error;

/// Failure class, mapped onto exit codes: validation 2, numerical 3,
/// missing stage dependency 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Dependency,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn dependency(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Dependency,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Dependency => 4,
        }
    }
}

impl From<teps::Error> for CliError {
    fn from(err: teps::Error) -> Self {
        let kind = match err {
            teps::Error::CompleteSeparation
            | teps::Error::ZeroWithinVariance
            | teps::Error::InvalidBounds { .. }
            | teps::Error::NegativeChiSquare(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        };
        CliError {
            kind,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError {
            kind: ErrorKind::Dependency,
            message: err.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::validation(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::validation(err.to_string())
    }
}
