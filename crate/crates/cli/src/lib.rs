//! Command-line front end: CSV input, tuned fits, paths, screening,
//! cross-validation and the simulation designs, with JSON reports.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod report;

pub use error::CliError;
