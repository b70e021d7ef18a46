//! Study configuration, pipeline stages and reporting behind the `microsize` binary.

pub mod config;
pub mod error;
pub mod report;
pub mod study;
pub mod tables;

pub use error::{CliError, CliResult};
