//! Reproducible FAQUAD experiments: JSON configuration, figure presets, and
//! deterministic CSV/JSON artifacts.

pub mod cli;
pub mod config;
pub mod error;
pub mod presets;
pub mod run;

pub use config::{parse_config, ExperimentConfig};
pub use error::CliError;
pub use run::{execute, Command, Manifest};
