// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod env;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod layout;
pub mod linalg;
pub mod ope;
pub mod policy;
pub mod reward;
pub mod runner;
pub mod trace;
pub mod validate;

pub use error::{Error, Result};
