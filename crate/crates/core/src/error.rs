use thiserror::Error;

/// Errors raised by the model, solvers and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("integration produced a non-finite state at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("found {count} endemic roots where a unique one was expected")]
    MultipleRoots { count: usize },

    #[error("bisection endpoints do not bracket: {0}")]
    BracketInvalid(String),

    #[error("no achievable target at M1 = {m1}")]
    NoAchievableTarget { m1: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("i/o failure: {0}")]
    Io(String),
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Whether the failure lies in the caller's input rather than in a computation.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::UnknownScenario(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
