//! Recovery of two-dimensional wavelet coefficients from Fourier samples by
//! generalized sampling.
//!
//! The crate is organised bottom-up: [`lattice`] handles integer scaling
//! matrices and sampling lattices, [`wavelet`] evaluates Daubechies filters and
//! their Fourier transforms, [`boundary`] builds orthonormal wavelets on the unit
//! interval, [`gramian`] assembles the cross-Gramian between Fourier samples and
//! a wavelet basis, [`solver`] computes stable sampling rates and least squares
//! reconstructions, [`inequalities`] checks the sampling inequalities behind the
//! rate, and [`reconstruct`] measures reconstruction errors and writes images.

pub mod boundary;
pub mod error;
pub mod gramian;
pub mod inequalities;
pub mod lattice;
pub mod linalg;
pub mod quadrature;
pub mod reconstruct;
pub mod solver;
pub mod testfns;
pub mod wavelet;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
