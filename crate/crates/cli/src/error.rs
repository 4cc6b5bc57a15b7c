//! CLI error taxonomy with a stable exit-code contract:
//! 0 success, 1 validation, 2 runtime/numeric, 3 I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &std::path::Path, err: &std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Errors raised while loading or validating inputs count as validation;
/// the same family errors during a run are numeric. These helpers make the
/// phase explicit at call sites.
pub trait PhaseExt<T> {
    fn in_validation(self, context: &str) -> CliResult<T>;
    fn in_run(self, context: &str) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> PhaseExt<T> for Result<T, E> {
    fn in_validation(self, context: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Validation(format!("{context}: {e}")))
    }

    fn in_run(self, context: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Numeric(format!("{context}: {e}")))
    }
}
