//! A finite-space laboratory for the efficiency of forecast aggregators.
//!
//! Forecasters are calibrated: each reports E(Y | F_j) for an information
//! partition F_j of a finite probability space. The crate builds such
//! forecasters, pools them with mean-type rules, computes the efficient
//! aggregate E(Y | X_1, …, X_N) by brute force, and checks how the two differ.
//!
//! * [`prob`]: spaces, variables, partitions, conditional expectation.
//! * [`forecasters`]: calibrated forecasters, information menus, noise.
//! * [`aggregators`]: the mean zoo, hull classification, efficient aggregate,
//!   linear-pool weights.
//! * [`diagnostics`]: calibration, extremizing, recalibration, inefficiency.
//! * [`experiments`]: reproducible worked examples and simulations.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregators;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod forecasters;
pub mod instances;
pub mod prob;

pub use error::{Error, Result};
