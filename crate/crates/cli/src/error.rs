use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input files.
    #[error("{0}")]
    Input(String),
    /// Failure while running.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<hmp_core::Error> for CliError {
    fn from(e: hmp_core::Error) -> Self {
        use hmp_core::Error as E;
        match e {
            E::Config(_) | E::Dimension(_) | E::BadMagic(_) | E::UnexpectedEof(_) | E::BadChannelFile { .. } => {
                CliError::Input(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}
