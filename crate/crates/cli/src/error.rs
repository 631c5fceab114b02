use std::fmt;
use std::process::ExitCode;

/// Categorized failure; the category decides the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination not caught by the parser.
    Usage(String),
    /// Invalid configuration or input file.
    Config(String),
    /// Failure while doing the work.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 1,
        })
    }

    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
