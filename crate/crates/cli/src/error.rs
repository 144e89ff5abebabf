use std::path::Path;
use std::process::ExitCode;

use afterpulse::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    File { path: String, source: Error },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn file(path: &Path) -> impl FnOnce(Error) -> Self + '_ {
        move |source| CliError::File { path: path.display().to_string(), source }
    }

    /// 2 bad arguments, 3 I/O or file format, 4 fit or convergence.
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) | CliError::File { source: e, .. } => match e {
                Error::Io(_) | Error::Format(_) | Error::NonMonotonic { .. } => 3,
                Error::Fit(_) | Error::Convergence { .. } => 4,
                Error::Domain(_) | Error::Model(_) => 2,
            },
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub type CliResult<T> = Result<T, CliError>;
