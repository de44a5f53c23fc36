//! Nonlinear potentials, pointwise estimates and singular-solution constructions for the
//! semilinear elliptic systems 0 ≤ -Δu ≤ f(v), 0 ≤ -Δv ≤ g(u) near an isolated singularity.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod constructor;
pub mod core_model;
pub mod error;
pub mod estimates;
pub mod potentials;
pub mod report;
pub mod repr_formula;

pub use error::{Error, Result};
