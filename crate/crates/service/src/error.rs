use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    /// `code` is a stable machine-readable tag.
    #[error("{message}")]
    Conflict { code: &'static str, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("study `{0}` has no completed sessions")]
    EmptyStudy(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("event log {path}, line {line}: {message}")]
    Integrity { path: String, line: usize, message: String },
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Conflict { code, message: message.into() }
    }

    /// Stable tag reported to clients alongside the message.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict { code, .. } => code,
            ServiceError::Validation(_) => "validation",
            ServiceError::EmptyStudy(_) => "empty_study",
            ServiceError::Config(_) => "config",
            ServiceError::Integrity { .. } => "integrity",
            ServiceError::Io(_) => "storage",
            ServiceError::Internal(_) => "internal",
        }
    }
}
