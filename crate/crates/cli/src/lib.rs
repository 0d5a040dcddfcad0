//! Batch front end: each subcommand runs one experiment, writes its
//! artifacts into the output directory and a `summary.json` with the
//! assertions it checked.

pub mod commands;
pub mod config;

use serde::Serialize;
use serde_json::Value;

pub use config::{Command, ConfigError, ExperimentConfig, FieldKind};

/// One named assertion; `criterion` links it to the acceptance list.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: Option<u8>, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { criterion, name: name.into(), passed, detail: detail.into() }
    }
}

/// What a command hands back before the summary is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: Command,
    pub config: ExperimentConfig,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Summary {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] morrey_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Run the configured command and write `summary.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    std::fs::create_dir_all(&cfg.out)?;
    let outcome = commands::dispatch(cfg)?;
    let summary = Summary {
        command: cfg.command,
        config: cfg.clone(),
        passed: outcome.checks.iter().all(|c| c.passed),
        results: outcome.results,
        checks: outcome.checks,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(cfg.out.join("summary.json"), text)?;
    Ok(summary)
}
