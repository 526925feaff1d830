use thiserror::Error;

/// Errors raised by the numerical engines, the scan harness and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent arguments (dimension mismatch, empty input, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A computation produced non-finite or otherwise unusable values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The truncated basis cannot represent the requested state.
    #[error("basis truncation error: {0}")]
    Truncation(String),
    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// The run would exceed the memory budget.
    #[error("insufficient resources: {0}")]
    Resources(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Domain(_)
            | Error::Numerical(_)
            | Error::Truncation(_)
            | Error::Resources(_) => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }

    /// Short machine-readable category, used for JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Usage(_) => "usage",
            Error::Numerical(_) => "numerical",
            Error::Truncation(_) => "truncation",
            Error::Config(_) => "config",
            Error::Resources(_) => "resources",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
