use lambert_indiff::IndiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] IndiffError),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical_failure() => 3,
            CliError::CheckFailed(_) => 3,
            _ => 2,
        }
    }
}
