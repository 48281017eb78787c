#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exec;
pub mod model;
pub mod quadrature;
pub mod specfun;
pub mod theorems;
pub mod tuning;

pub use error::{Error, Result};
