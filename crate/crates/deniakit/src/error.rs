use thiserror::Error;

/// Errors raised by the library. Every variant is a domain failure; usage
/// problems (bad flags, unreadable files) are handled by the CLI layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid channel: row {row} {reason} (residual {residual:.3e})")]
    InvalidChannel {
        row: usize,
        reason: String,
        residual: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("symbol index {index} out of range for alphabet of size {size}")]
    SymbolOutOfRange { index: usize, size: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("channel is not physically degraded (residual {residual:.3e}); receiver deniability requires Z to be a degraded version of Y")]
    NotDegraded { residual: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration budget exceeded: {needed} states > {budget}; use Monte Carlo evaluation instead")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("invalid codebook: {0}")]
    Codebook(String),

    #[error("message {message} out of range (|M| = {count})")]
    MessageOutOfRange { message: usize, count: usize },

    #[error("word is not a codeword of this codebook")]
    NotACodeword,

    #[error("zero-probability conditioning event: {0}")]
    ZeroProbability(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
