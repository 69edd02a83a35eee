//! Conformal risk control for ordinal classification.
//!
//! Ordinal labels are the integers `0..K`. A model emits a probability score
//! per class; from those scores this crate builds *contiguous* prediction sets
//! `[lower, upper]` that always contain the point prediction and are nested in
//! a threshold `λ ∈ [0, 1]` (larger `λ`, smaller set). Calibration picks `λ̂`
//! from held-out labeled scores so the expected set-valued loss on a fresh
//! example stays below a chosen level `α`.
//!
//! Two loss families are supported:
//!
//! * weight-based: `h(y)` if the label is missed, with per-class weights `h`
//!   max-normalized to 1;
//! * divergence-based: distance from the label to the interval, divided by
//!   `K - 1`.
//!
//! Both losses take values in `[0, 1]`, so the loss bound `B` is 1.
//!
//! The crate is `no_std` and only needs `alloc`. IO, simulation and the
//! experiment harness live in the `ordinal-crc` crate.
//!
//! ```
//! use ordinal_crc_core::{build_set, LossSpec, ScoreVector, WeightScheme};
//!
//! let scores = ScoreVector::new(vec![0.1, 0.2, 0.4, 0.2, 0.1]).unwrap();
//! let loss = LossSpec::weighted(WeightScheme::equal(5));
//! let set = build_set(&scores, &loss, 0.35).unwrap();
//! assert_eq!((set.lower(), set.upper()), (1, 3));
//! ```
#![no_std]

extern crate alloc;

pub mod calibration;
mod error;
pub mod losses;
pub mod oracles;
pub mod sets;
pub mod types;

pub use calibration::{
    calibrate_binary, calibrate_exact, jump_diagnostics, sample_breakpoints, CalibrationMethod,
    CalibrationResult, JumpDiagnostics, PreparedRow, SampleBreakpoints,
};
pub use error::{Error, Result};
pub use losses::{divergence_loss, interval_risk_divergence, interval_risk_weighted, weighted_loss};
pub use sets::{build_set, point_prediction, GreedyChain};
pub use types::{validate_dataset, LabeledScore, LossSpec, PredictionSet, ScoreVector, WeightScheme};

/// Almost-sure upper bound on both normalized loss families.
pub const LOSS_BOUND: f64 = 1.0;
