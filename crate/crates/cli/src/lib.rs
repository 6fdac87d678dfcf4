//! Command implementations behind the `pas` binary. Each subcommand takes a
//! [`commands::RunContext`] and returns an [`commands::Outcome`] holding its CSV;
//! the binary only parses flags, writes files and maps errors to exit codes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod selftest;
pub mod sweep;

pub use commands::{Outcome, RunContext};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
