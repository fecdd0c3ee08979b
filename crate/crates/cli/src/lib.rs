//! Experiment runner: resolves configurations, runs the named pipelines and
//! writes CSV/JSON/PPM artifacts with provenance.

pub mod config;
pub mod error;
pub mod run;

pub use config::{Backend, Experiment, ExperimentConfig, Settings, Windows};
pub use error::{CliError, FieldError};
pub use run::{config_hash, run, RunOptions, Summary};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SAWTOOTH_OUT";

/// Load a config echo written by an earlier run.
pub fn load_echo(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config("config", e.to_string()))
}
