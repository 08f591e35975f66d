//! Experiment runner: TOML configs in, CSV/JSON reports out.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, CliError};
pub use config::{parse_config, to_toml, Command, ConfigErrors, ExperimentConfig, FieldError, Format};
pub use report::Report;
