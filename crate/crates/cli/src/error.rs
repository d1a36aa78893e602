use ham_core::HamError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Exit code 3.
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// Exit code 4.
    #[error("integrity failure: {0}")]
    Integrity(String),
    /// Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Integrity(_) => 4,
        }
    }
}

impl From<HamError> for CliError {
    fn from(e: HamError) -> Self {
        match e {
            HamError::Domain(m) | HamError::Config(m) => CliError::Config(m),
            HamError::UnsupportedOrder { .. } | HamError::Precision(_) => CliError::Config(e.to_string()),
            HamError::Invariant(m) => CliError::Invariant(m),
            HamError::Numeric { .. } | HamError::Synthesis { .. } | HamError::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
