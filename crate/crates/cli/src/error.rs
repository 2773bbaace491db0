use std::fmt;
use std::path::Path;

/// Exit statuses of the `reachdec` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_CERTIFIED: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Core(reachdec::Error),
    /// Scenario file that does not match the schema or fails a cross-check.
    Scenario { path: String, message: String },
    Property(String),
    Io { path: String, message: String },
    Usage(String),
}

impl CliError {
    pub fn scenario(path: &Path, message: impl Into<String>) -> Self {
        CliError::Scenario {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.module(),
            _ => "cli",
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Scenario { .. } => "scenario",
            CliError::Property(_) => "property",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            _ => exit::INPUT,
        }
    }

    /// The single diagnostic line, `error:<module>:<kind>: <message>`.
    pub fn line(&self) -> String {
        format!("error:{}:{}: {}", self.module(), self.kind(), self)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Scenario { path, message } => write!(f, "{path}: {message}"),
            CliError::Property(m) => write!(f, "{m}"),
            CliError::Io { path, message } => write!(f, "{path}: {message}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(reachdec::Error::from(e).origin())
            }
        }
    )*};
}

from_core!(
    reachdec::sets::SetError,
    reachdec::approx::ApproxError,
    reachdec::linalg::LinalgError,
    reachdec::discretize::DiscretizeError,
    reachdec::reach::ReachError,
    reachdec::oracle::OracleError
);

impl From<reachdec::Error> for CliError {
    fn from(e: reachdec::Error) -> Self {
        CliError::Core(e.origin())
    }
}
