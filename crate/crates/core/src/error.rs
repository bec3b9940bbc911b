use std::io;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{what}: expected {expected} elements, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("entry {index} is {value}, expected +1 or -1")]
    NotPlusMinusOne { index: usize, value: f64 },

    #[error("not a permutation: {0}")]
    NotAPermutation(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("decomposition depth {levels} too deep for a {rows}x{cols} image")]
    DepthTooDeep {
        levels: usize,
        rows: usize,
        cols: usize,
    },

    #[error("distribution sum {sum} deviates from 1 beyond tolerance {tolerance}")]
    Unnormalized { sum: f64, tolerance: f64 },

    #[error("joint probability present where a marginal is zero (index {0})")]
    InconsistentMarginal(usize),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
}
