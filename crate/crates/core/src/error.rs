use thiserror::Error;

pub type Result<T> = std::result::Result<T, ProbeError>;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error{}: {message}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    Numeric {
        iteration: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ProbeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ProbeError::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(iteration: Option<usize>, msg: impl Into<String>) -> Self {
        ProbeError::Numeric {
            iteration,
            message: msg.into(),
        }
    }
}
