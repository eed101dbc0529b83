use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure{}: {what}", .point.map(|p| format!(" at point {p}")).unwrap_or_default())]
    NumericalFailure { point: Option<usize>, what: String },
    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidArchitecture(_) => "invalid_architecture",
            Error::InvalidInput(_) => "invalid_input",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::UnsupportedProblem(_) => "unsupported_problem",
            Error::Checkpoint(_) => "checkpoint",
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(point: Option<usize>, what: impl Into<String>) -> Self {
        Error::NumericalFailure {
            point,
            what: what.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
