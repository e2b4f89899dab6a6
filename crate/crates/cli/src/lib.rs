//! Configuration-driven front end: certify parameters, run the solvers with
//! audits, and analyze recorded traces.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{cmd_check, cmd_rates, cmd_run, Code, Outcome};
pub use config::{ConfigError, RunConfig};
