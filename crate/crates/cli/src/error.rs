use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<pimbs::Error> for CliError {
    fn from(e: pimbs::Error) -> Self {
        use pimbs::Error as E;
        match e {
            E::Io { path, source } => CliError::Io { path, source },
            E::Parse { .. } | E::InvalidArgument(_) | E::InvalidModel(_) | E::Dimension { .. } => {
                CliError::Usage(e.to_string())
            }
            E::Domain(_) | E::Infeasible(_) | E::NonFinite { .. } => CliError::Numeric(e.to_string()),
        }
    }
}
