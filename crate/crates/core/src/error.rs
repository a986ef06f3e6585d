use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped so callers (notably the CLI) can map them onto
/// usage, data and numeric failure classes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("state error: {0}")]
    State(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("form error: {0}")]
    Form(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error in field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("version error: expected format_version \"1\", found {0}")]
    Version(String),

    #[error("I/O error: {0}")]
    Io(String),
}

/// Failure class of an error, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl TensorError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        TensorError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Same variant with `prefix: ` prepended to its message.
    pub fn context(self, prefix: impl std::fmt::Display) -> Self {
        use TensorError::*;
        match self {
            Dimension(m) => Dimension(format!("{prefix}: {m}")),
            Index(m) => Index(format!("{prefix}: {m}")),
            State(m) => State(format!("{prefix}: {m}")),
            Argument(m) => Argument(format!("{prefix}: {m}")),
            Numeric(m) => Numeric(format!("{prefix}: {m}")),
            Data(m) => Data(format!("{prefix}: {m}")),
            Form(m) => Form(format!("{prefix}: {m}")),
            Format(m) => Format(format!("{prefix}: {m}")),
            Validation { field, reason } => Validation {
                field,
                reason: format!("{prefix}: {reason}"),
            },
            Version(m) => Version(m),
            Io(m) => Io(format!("{prefix}: {m}")),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            TensorError::Argument(_) => ErrorClass::Usage,
            TensorError::Numeric(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}

impl From<std::io::Error> for TensorError {
    fn from(e: std::io::Error) -> Self {
        TensorError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TensorError>;
