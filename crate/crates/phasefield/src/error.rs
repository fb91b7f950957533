use thiserror::Error;

/// Crate-wide error type. `Config`/`InvalidParam` map to CLI exit code 2,
/// everything else to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidParam(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam(_) | Error::Config(_) | Error::Json(_) | Error::Shape(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
