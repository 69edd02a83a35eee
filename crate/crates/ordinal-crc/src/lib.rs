//! Simulation, evaluation harness, file formats and command-line front end
//! for ordinal conformal risk control.
//!
//! The algorithms themselves live in [`ordinal_crc_core`]; this crate adds
//! what needs `std`: seeded Gaussian simulation with exact Bayes posteriors,
//! parallel split-calibration trials, CSV/JSON IO and the `ordinal-crc`
//! binary.

pub mod cli;
mod error;
pub mod eval;
pub mod io;
pub mod simgen;

pub use error::{Error, Result};
pub use ordinal_crc_core as core;
