use gksl_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or incomplete input.
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for input and validation errors, 3 for resource caps, truncation
    /// alarms and integration failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { source, .. } => match source {
                CoreError::SizeLimit { .. } | CoreError::Truncation(_) | CoreError::Integration(_) => 3,
                _ => 2,
            },
            CliError::Input(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn is_truncation(&self) -> bool {
        matches!(self, CliError::Core { source: CoreError::Truncation(_), .. })
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context: what.to_string(), source })
    }
}
