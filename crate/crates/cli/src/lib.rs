//! Command-line front end for `nervereg`: data ingestion, configuration,
//! synthetic data, cross-validation and diagnostics export.

pub mod config;
pub mod cv;
pub mod data;
pub mod diagnose;
pub mod error;
pub mod fit;
pub mod simulate;

pub use error::{CliError, CliResult};
