use thiserror::Error;

/// Errors raised by the solver toolkit.
///
/// Each variant corresponds to one failure class; the benchmark binary maps
/// them onto process exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("numerical error: {message} (last estimate {last_estimate})")]
    Numerical { message: String, last_estimate: f64 },
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected {expected}, got {got}")))
    }
}
