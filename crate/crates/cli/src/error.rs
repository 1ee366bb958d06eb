use std::fmt;

use spca::SpcaError;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, plan keys or argument values (exit 1).
    Usage(String),
    /// Unreadable or malformed input files (exit 2).
    Data(String),
    /// The solver gave up (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SpcaError> for CliError {
    fn from(e: SpcaError) -> Self {
        let msg = e.to_string();
        if e.is_numerical() {
            return CliError::Numerical(msg);
        }
        match e.root() {
            SpcaError::InvalidArgument(_) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
