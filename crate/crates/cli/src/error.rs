use std::fmt;

/// Failure classes and their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad config or input values: exit 1.
    Validation(String),
    /// Solver hit its cap; outputs were still written: exit 2.
    NonConvergence(String),
    /// Exit 3.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::NonConvergence(m) => write!(f, "not converged: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<blocksparse::Error> for CliError {
    fn from(e: blocksparse::Error) -> Self {
        match e {
            blocksparse::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
