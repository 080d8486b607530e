use std::path::Path;

use thiserror::Error;

/// Failures of the command-line layer, grouped by exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad arguments, configuration or unreadable inputs.
    #[error("{0}")]
    User(String),
    /// Missing or malformed benchmark data.
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::User(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub(crate) fn user_io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::User(format!("{}: {err}", path.display()))
    }

    pub(crate) fn data_io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }
}

impl From<bcfb::Error> for BenchError {
    fn from(e: bcfb::Error) -> Self {
        match e {
            bcfb::Error::Config(_) | bcfb::Error::Dimension(_) | bcfb::Error::Capacity(_) => Self::User(e.to_string()),
            bcfb::Error::Data(_) => Self::Data(e.to_string()),
            bcfb::Error::Numerical { .. } => Self::Numerical(e.to_string()),
        }
    }
}
