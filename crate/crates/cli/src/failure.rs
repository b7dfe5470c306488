use contact_algebroid::Error;
use thiserror::Error;

/// Command failures, each tied to a fixed process exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("regularity failure: {0}")]
    Regularity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Integration(_) => 3,
            Failure::Regularity(_) => 4,
        }
    }

    /// Classifies an engine error raised while integrating.
    pub fn during_integration(e: Error) -> Failure {
        match e {
            Error::Regularity { .. } | Error::Convergence { .. } => Failure::Regularity(e.to_string()),
            Error::Input(_) | Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Integration(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Regularity { .. } | Error::Convergence { .. } => Failure::Regularity(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}
