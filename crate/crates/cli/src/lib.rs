//! Batch driver for the delay-hopf toolkit: config parsing, command
//! pipelines, CSV/SVG outputs and the validation suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod validate;

pub use error::{CliError, CliResult};
