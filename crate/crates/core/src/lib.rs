// `!(x > 0.0)` is used on purpose throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
mod ode;
pub mod rmt;
pub mod rng;
pub mod shrinkage;
pub mod simulator;
pub mod theory;
pub mod transfer;

pub use error::{Error, Result};
