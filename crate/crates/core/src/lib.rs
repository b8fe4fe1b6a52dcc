// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod benchmark;
pub mod chain;
pub mod closed_forms;
pub mod error;
pub mod gaussian_ode;
pub mod io;
pub mod limit;
pub mod potentials;
pub mod rng;

pub use error::{Error, Result};
