//! Files, configuration, experiments and the `manidens` command line on top
//! of `manidens-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod formats;
pub mod manifest;

pub use config::{load_config, parse_config, save_config, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use exec::Parallel;
