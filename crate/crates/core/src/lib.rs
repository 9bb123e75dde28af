//! Hybrid quantum-classical reservoir computing.
//!
//! A parameterized circuit is simulated on every time step, measured in the
//! X, Y and Z bases, and the resulting expectation vector drives a leaky
//! classical reservoir whose state is read out by ridge regression.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod measurement;
pub mod metrics;
pub mod readout;
pub mod reservoir;
pub mod rng;
pub mod statevector;

pub use error::{HqrcError, Result};
