use thiserror::Error;

/// Errors produced by the library.
///
/// Each variant maps onto a distinct process exit code in the CLI
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input (player index, action index, shapes).
    #[error("input error: {0}")]
    Input(String),

    /// A mathematical precondition does not hold (e.g. q outside its interval).
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration or joint space exceeds its configured ceiling.
    #[error("capacity error: {what} needs {estimate}, ceiling is {ceiling}")]
    Capacity {
        what: String,
        estimate: u128,
        ceiling: u128,
    },

    /// Invalid experiment or CLI configuration; all violations are listed.
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    /// A malformed line in a text file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// An internal invariant was violated. Never expected to fire.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Parse { .. } | Error::Json(_) => 2,
            Error::Config(_) => 3,
            Error::Capacity { .. } => 4,
            Error::Io(_) => 5,
            Error::Domain(_) => 6,
            Error::Internal(_) => 70,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
