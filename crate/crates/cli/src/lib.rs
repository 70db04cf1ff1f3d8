//! Command-line front end: strict JSON configuration, CSV sweeps and JSON
//! verification reports with a fixed exit-code contract.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;
pub mod verify;

pub use commands::{CliError, Outcome, Task};
pub use config::RunConfig;
pub use verify::Suite;
