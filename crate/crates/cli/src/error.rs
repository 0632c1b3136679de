use std::fmt;

/// Exit 1 for bad input, exit 2 when the program contradicts itself.
#[derive(Debug)]
pub enum CliError {
    Validation(anyhow::Error),
    Internal(String),
}

impl CliError {
    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(e) => write!(f, "{e:#}"),
            CliError::Internal(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Validation(e)
    }
}

impl From<dirimult_core::Error> for CliError {
    fn from(e: dirimult_core::Error) -> Self {
        CliError::Validation(e.into())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
