//! Experiment front end for `gps-core`: configuration, seeded runs and
//! sweeps with CSV artifacts, and single-image demos.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
