//! Config-driven scenario runner for the Kähler energy laboratory.

pub mod config;
pub mod output;
pub mod scenarios;
pub mod tolerance;

use std::path::Path;
use std::time::Instant;

use kahler_core::LabError;
use thiserror::Error;

pub use config::{Scenario, ScenarioConfig};
pub use output::{ScenarioReport, Trace};

#[derive(Debug, Error)]
pub enum LabCliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] LabError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabCliError {
    /// 2 for usage and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabCliError::Config(_) | LabCliError::Io(_) => 2,
            LabCliError::Core(LabError::Parameter(_) | LabError::UnsupportedModel(_)) => 2,
            LabCliError::Core(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LabCliError::Config(_) => "config",
            LabCliError::Io(_) => "io",
            LabCliError::Core(LabError::Parameter(_)) => "parameter",
            LabCliError::Core(LabError::UnsupportedModel(_)) => "unsupported_model",
            LabCliError::Core(LabError::NotKahler { .. }) => "not_kahler",
            LabCliError::Core(LabError::PathBroken { .. }) => "path_broken",
            LabCliError::Core(LabError::Solver(_)) => "solver",
            LabCliError::Core(LabError::Generator { .. }) => "generator",
        }
    }
}

pub struct RunResult {
    pub report: ScenarioReport,
    pub traces: Vec<Trace>,
}

/// Validates and runs one scenario, timing it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, LabCliError> {
    cfg.validate()?;
    let start = Instant::now();
    let outcome = scenarios::run(cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    Ok(RunResult {
        report: ScenarioReport::new(cfg, outcome.report, runtime),
        traces: outcome.traces,
    })
}

/// Runs a scenario and writes its artifacts (or `error.json`) into `dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path) -> Result<ScenarioReport, LabCliError> {
    match run_scenario(cfg) {
        Ok(result) => {
            output::write_artifacts(dir, &result.report, &result.traces)?;
            Ok(result.report)
        }
        Err(err) => {
            // best effort: the original error is what the caller needs
            let _ = output::write_error(dir, cfg.scenario.name(), &err);
            Err(err)
        }
    }
}
