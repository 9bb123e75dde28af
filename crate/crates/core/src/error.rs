use thiserror::Error;

pub type Result<T> = std::result::Result<T, HqrcError>;

#[derive(Debug, Error)]
pub enum HqrcError {
    /// Invalid dimensions, names, ranges or other static setup problems.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments that violate its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A computation produced or received a non-finite or singular value.
    #[error("numeric fault{}: {message}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numeric { message: String, step: Option<usize> },

    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl HqrcError {
    pub fn config(msg: impl Into<String>) -> Self {
        HqrcError::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        HqrcError::Usage(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        HqrcError::Numeric {
            message: msg.into(),
            step: None,
        }
    }

    pub fn numeric_at(msg: impl Into<String>, step: usize) -> Self {
        HqrcError::Numeric {
            message: msg.into(),
            step: Some(step),
        }
    }

    /// Attach a step index to a numeric fault that does not carry one yet.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            HqrcError::Numeric {
                message,
                step: None,
            } => HqrcError::Numeric {
                message,
                step: Some(step),
            },
            other => other,
        }
    }
}

impl From<serde_json::Error> for HqrcError {
    fn from(e: serde_json::Error) -> Self {
        HqrcError::Serialization(e.to_string())
    }
}

impl From<csv::Error> for HqrcError {
    fn from(e: csv::Error) -> Self {
        HqrcError::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for HqrcError {
    fn from(e: toml::de::Error) -> Self {
        HqrcError::Serialization(e.to_string())
    }
}
