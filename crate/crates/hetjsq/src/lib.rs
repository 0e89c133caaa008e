//! Command-line companion of `hetjsq-core`: TOML system files, parallel
//! replications with confidence intervals, CSV output and the experiment
//! recipes behind `hetjsq reproduce`.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod replicate;

pub use error::{CliError, Result};
