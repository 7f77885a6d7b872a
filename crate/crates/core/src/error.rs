use thiserror::Error;

/// Errors raised by the laboratory. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix dimension {dim} exceeds the dense cap {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("energy {energy} lies in the spectrum (distance {distance:e} below tolerance {tolerance:e})")]
    SingularEnergy {
        energy: f64,
        distance: f64,
        tolerance: f64,
    },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code: 1 validation, 2 capacity, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Validation(_) | Error::Serialization(_) => 1,
            Error::Capacity { .. } => 2,
            Error::SingularEnergy { .. } | Error::Numerical(_) | Error::Io(_) => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
