use thiserror::Error;

#[derive(Debug, Error)]
pub enum CakeError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller or strategy broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An enumeration or grid exceeded its configured budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    /// The game horizon ran out; strategies propagate this to stop cleanly.
    #[error("horizon exhausted after {0} rounds")]
    Exhausted(u64),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CakeError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CakeError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CakeError>;
