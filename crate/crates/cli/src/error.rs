use thiserror::Error;

use pvb_core::PvbError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    NoConvergence(PvbError),
    #[error(transparent)]
    Underflow(PvbError),
    #[error("{failed} of {total} validation checks failed")]
    Validation { failed: usize, total: usize },
    #[error(transparent)]
    Core(PvbError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Underflow(_) => 4,
            CliError::Validation { .. } => 5,
            CliError::Core(_) => 6,
        }
    }
}

impl From<PvbError> for CliError {
    fn from(e: PvbError) -> Self {
        match e {
            PvbError::NoConvergence { .. } => CliError::NoConvergence(e),
            PvbError::StepUnderflow { .. } => CliError::Underflow(e),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
