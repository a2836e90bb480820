use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    /// The free-field check declined its input; a summary is still written.
    #[error("{0}")]
    Refused(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::Validation(_) | CliError::Refused(_) => 3,
            CliError::Output(_) => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numeric(_) => "numeric",
            CliError::Refused(_) => "refused",
            CliError::Output(_) => "output",
        }
    }
}

impl From<klspec::Error> for CliError {
    fn from(e: klspec::Error) -> Self {
        match e {
            klspec::Error::Refused(msg) => CliError::Refused(msg),
            e if e.is_validation() => CliError::Validation(e.to_string()),
            e => CliError::Numeric(e.to_string()),
        }
    }
}
