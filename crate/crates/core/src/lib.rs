// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod envs;
pub mod error;
pub mod harness;
pub mod irl;
pub mod mdp;
pub mod rairl;
pub mod regularizer;
pub mod validation;

pub use error::{Error, Result};
