//! Exact computations relating quantum potentials on framed Frobenius modules
//! to variations of Hodge structure near a maximally unipotent boundary point.
//!
//! Everything is exact: scalars live in ℚ(τ) with τ standing for 2πi, and
//! series are truncated at a fixed total degree.

pub mod amodel;
pub mod catalog;
pub mod correspondence;
pub mod error;
pub mod format;
pub mod frobenius;
pub mod hodge;
pub mod matrix;
pub mod potential;
pub mod report;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use frobenius::FrobeniusModule;
pub use matrix::{Matrix, Subspace};
pub use scalar::Scalar;
pub use series::{LogPoly, QSeries, Series};
