use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No eigenvalue of the kernel matrix survived the positivity cutoff.
    #[error("degenerate kernel: no eigenvalue above the positivity cutoff")]
    DegenerateKernel,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("insufficient data: need at least {needed} finite values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("objective evaluation failed at stage {stage}: {message}")]
    Oracle { stage: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
