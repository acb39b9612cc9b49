//! Exponential-integrator SAV solver for the coupled Q-tensor / density
//! model of smectic-A liquid crystals on periodic grids.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fields;
pub mod operators;
pub mod sampling;
pub mod energy;
pub mod variations;
pub mod stepper;
pub mod harness;
pub mod check;
pub mod io;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
