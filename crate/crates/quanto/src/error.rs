use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which side of the arbitrage band a requested option price fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandBound {
    /// At or below the discounted-intrinsic lower bound.
    LowerIntrinsic,
    /// At or above the spot upper bound.
    UpperSpot,
}

#[derive(Debug, Error)]
pub enum Error {
    /// A domain violation: non-finite input, parameter out of range, or a
    /// structurally invalid object (empty sample set, short matrix, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed market config: unknown keys, missing keys, or bad values.
    #[error("config: {0}")]
    Config(String),

    /// Malformed CSV input. `line` is 1-based and counts the header.
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    /// The target value lies outside the region where a solution exists.
    #[error("no solution: {message}")]
    NoSolution { violated: BandBound, message: String },

    /// An iterative solver ran out of iterations before reaching tolerance.
    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
