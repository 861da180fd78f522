//! Time-varying Shannon entropy of discrete sequences.
//!
//! The crate estimates k-th order block entropy with the plug-in
//! (empirical frequencies) estimator, approximates the estimator's variance
//! through order `n⁻³` from exact binomial and multinomial central moments,
//! tests two windows for equal entropy, and picks the rolling-window length
//! that best separates entropy regimes.
//!
//! Everything here is `no_std` with `alloc`; file formats, parallel Monte
//! Carlo drivers and the command line live in the `entroscan` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bandwidth;
pub mod entropy;
mod error;
pub mod hypothesis;
pub(crate) mod math;
pub mod moments;
pub mod pipeline;
pub mod poly;
pub mod simulate;
pub mod variance;
pub mod window;

pub use error::{Error, Result};

pub use bandwidth::{BandwidthResult, ObjectiveConfig, WindowLayout};
pub use entropy::{BlockCounts, EntropyEstimate, SymbolSequence};
pub use hypothesis::{Direction, QuantileTable, TestResult};
pub use moments::MomentOrder;
pub use poly::MomentPolynomial;
pub use variance::VarianceBreakdown;
