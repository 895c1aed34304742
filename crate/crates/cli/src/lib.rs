//! Command-line pipeline: synthetic data, fusion, scale recovery, evaluation
//! and the pose benchmark.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod records;

pub use cli::{run, Cli};
pub use error::{CliError, Result};
