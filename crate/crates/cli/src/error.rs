use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] qkck::QkError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        Self::Io { path: path.to_string(), source }
    }

    /// Exit code: 2 for anything the user can fix in the invocation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Json(_) => 2,
            CliError::Numeric(qkck::QkError::Unknown { .. } | qkck::QkError::DimensionTooSmall(_)) => 2,
            CliError::Numeric(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
