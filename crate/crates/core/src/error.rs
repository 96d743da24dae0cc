//! Error type shared by every module of the core crate.

use thiserror::Error;

/// Failures raised by the sampling, wavelet and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("invalid scaling matrix {entries:?}: {reason}")]
    InvalidScalingMatrix { entries: [i64; 4], reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported wavelet family with {0} vanishing moments")]
    UnsupportedFamily(usize),

    #[error("{what} did not converge after {iterations} iterations (last change {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{what} is not positive definite (smallest pivot {pivot:.3e})")]
    NotPositiveDefinite { what: &'static str, pivot: f64 },

    #[error("matrix of {rows}x{cols} needs {required} bytes, above the cap of {cap} bytes")]
    MemoryCap {
        rows: usize,
        cols: usize,
        required: usize,
        cap: usize,
    },

    #[error("cross-Gramian is numerically rank deficient (smallest singular value {sigma_min:.3e})")]
    RankDeficient { sigma_min: f64 },

    #[error("no stable sampling rate below the search cap: largest half-width {largest:?} reached sigma_min {sigma_min:.6}")]
    SearchCapExceeded { largest: (i64, i64), sigma_min: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
