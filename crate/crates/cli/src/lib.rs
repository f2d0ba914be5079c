//! Command-line driver for the master-equation simulator: configuration,
//! experiment dispatch and file output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Equation, Experiment, RunConfig, Settings};
pub use error::CliError;
pub use run::{execute, run, RunOutput};
