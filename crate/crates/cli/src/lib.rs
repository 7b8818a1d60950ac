//! Experiment harness on top of the `gpdm` solvers: manufactured problems,
//! sweeps, comparisons, file formats and charts.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod plot;
pub mod problems;

pub use error::{HarnessError, Result};
