use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: item id {item} is out of range for {num_items} items")]
    ItemOutOfRange {
        line: usize,
        item: u64,
        num_items: usize,
    },

    #[error("bit-matrix format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The transition matrix is singular (p + q = 1) so true counts cannot be recovered.
    #[error("reconstruction impossible: p + q = {sum} is too close to 1")]
    ReconstructionImpossible { sum: f64 },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invalid timing: {0}")]
    Timing(String),
}

pub type Result<T> = std::result::Result<T, Error>;
