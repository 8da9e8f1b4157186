use thiserror::Error;

/// Errors produced by the solver, the simulator and the sweep engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory converged but its limit matched none of the stable tuples.
    #[error("converged state (d={demand}, p={price:?}, b={bits:?}) matches no stable outcome")]
    ClassificationAmbiguous {
        demand: f64,
        price: Option<f64>,
        bits: Option<f64>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
