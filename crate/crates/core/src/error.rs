use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The domain (or a derived quantity such as `p₊ < N`) is unsuitable.
    #[error("domain error: {0}")]
    Domain(String),
    /// Sampled data is non-finite, mis-shaped or otherwise unusable.
    #[error("invalid input: {0}")]
    Input(String),
    /// A documented precondition (for example `q ≤ p`) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Partial sums of a gap sequence reached 1, or a term is not positive.
    #[error("invalid gap sequence: {0}")]
    GapSequence(String),
    /// The requested operation is not available for this configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
