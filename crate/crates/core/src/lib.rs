//! Switching differentiator (SD) for online estimation of signal
//! derivatives, with high-gain-observer and HOSM baselines, a return-map
//! convergence analysis, and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod convergence;
pub mod differentiators;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod metrics;
pub mod plot;
pub mod signals;
pub mod trajectory;

pub use error::{Error, Result};
