use thiserror::Error;

/// Errors produced by operator construction, system assembly and time marching.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator underdetermined: {0}")]
    OperatorUnderdetermined(String),

    #[error("unsupported trace pairing: {0}")]
    UnsupportedPairing(String),

    #[error("system too large for dense assembly: {dim} unknowns exceeds cap {cap}")]
    TooLargeForDense { dim: usize, cap: usize },

    #[error("time-step estimation failed: {0}")]
    EstimationFailed(String),

    #[error("numerical blowup at step {step}: non-finite value in block '{block}'")]
    NumericalBlowup { step: u64, block: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    /// Every violation found while checking a scenario, each prefixed with its config location.
    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
