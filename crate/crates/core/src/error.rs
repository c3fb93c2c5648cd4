use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss. `trace` holds every loss seen so far.
    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String, trace: Vec<f64> },

    #[error("particle {particle} became non-finite at step {step} of stage {stage}")]
    ParticleBlowup { stage: u8, step: usize, particle: usize },

    #[error("stage-1 weight denominator underflowed ({denominator:e}) at step {step}")]
    RatioUnderflow { step: usize, denominator: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
