use thiserror::Error;

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input data (exit 2).
    #[error("input error: {0}")]
    Input(String),
    /// Invalid configuration or arguments (exit 3).
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure during fitting (exit 4).
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<nervereg::Error> for CliError {
    fn from(e: nervereg::Error) -> Self {
        use nervereg::Error as E;
        let msg = e.to_string();
        match e {
            E::Parameter(_) | E::Usage(_) | E::UnknownStrategy { .. } => CliError::Config(msg),
            E::Data(_) | E::Dimension(_) | E::Degenerate(_) | E::Io(_) | E::Json(_) => CliError::Input(msg),
            E::Numeric(_) | E::NotConverged { .. } | E::Selection(_) => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
