use std::io;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Anything wrong with the configuration; nothing has been written.
    #[error("config error: {0}")]
    Config(String),

    #[error("experiment `{experiment}` failed: {source}")]
    Numerical {
        experiment: &'static str,
        #[source]
        source: kolmo_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// Classifies a core error: bad arguments are configuration problems,
    /// everything else is a numerical failure.
    pub fn from_core(experiment: &'static str, e: kolmo_core::Error) -> Self {
        match e {
            kolmo_core::Error::InvalidArgument(msg) => CliError::Config(format!("{experiment}: {msg}")),
            source => CliError::Numerical { experiment, source },
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        })
    }
}
