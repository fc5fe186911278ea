use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A physical or structural parameter is out of range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Vector or matrix shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric value left the finite range mid-computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training diverged or could not proceed.
    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        CoreError::Parameter(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        CoreError::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CoreError::Numeric(msg.into())
    }
}
