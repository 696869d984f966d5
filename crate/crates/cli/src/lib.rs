//! Command-line front end for the `polarpark` library: scenario files,
//! presets, trajectory CSV files and the `polarpark` subcommands.

// NaN must fail range checks, so guards are written as `!(x < bound)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod certify;
pub mod error;
pub mod presets;
pub mod scenario_file;
pub mod trace;

pub use error::{CliError, CliResult};
