//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible dimensions passed to a block or tensor operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An index lies outside the mode sizes of the tensor or sample set.
    #[error("index out of bounds: {0}")]
    IndexOutOfBounds(String),

    /// Dense materialization would exceed the entry cap.
    #[error("dense tensor with {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: u128, cap: u64 },

    /// Invalid solver or experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input matrix or tensor does not have the rank an operation requires.
    #[error("rank-deficient input: {0}")]
    RankDeficient(String),

    /// An iterative procedure exhausted its pass budget.
    #[error("did not converge: {0}")]
    NoConvergence(String),

    /// A file did not match its documented format.
    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
