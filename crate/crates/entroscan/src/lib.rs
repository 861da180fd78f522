//! File formats, parallel Monte Carlo drivers and the `entroscan` command
//! line on top of [`entroscan_core`].
//!
//! Every parallel driver returns exactly what its serial counterpart in the
//! core crate returns: trials draw from streams derived from the master seed
//! and the trial index, and all reductions are order-independent.

mod error;

pub mod analyze;
pub mod experiment;
pub mod io;
pub mod parallel;

pub use entroscan_core;
pub use error::{Error, Result};
