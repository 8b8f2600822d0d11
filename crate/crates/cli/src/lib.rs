//! Scenario-driven front end: parses scenario files, runs the engine and the
//! validation suite, and writes CSV reports with a run manifest.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::time::Instant;

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;

pub use config::{parse_scenario, LoadedScenario, ScenarioFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] levyterm_core::Error),
    #[error("scenario: {0}")]
    Config(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Csv(PathBuf, #[source] csv::Error),
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub id: String,
    pub expected: String,
    pub got: String,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    pub fn pass(id: impl Into<String>, expected: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            expected: expected.into(),
            got: "ok".into(),
            tolerance: 0.0,
            passed: true,
        }
    }
}

/// What a command asserted, plus scalar results worth recording in the manifest.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<CheckRecord>,
    pub summary: Vec<(String, f64)>,
}

impl Outcome {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        Outcome {
            checks,
            summary: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Validate,
    Norms,
    Drift,
    Integrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Validate => "validate",
            Command::Norms => "norms",
            Command::Drift => "drift",
            Command::Integrate => "integrate",
        }
    }
}

/// Loads the scenario, runs the command with `parallelism` applied, and writes
/// all artifacts plus `manifest.toml` into `out_dir`.
pub fn run(command: Command, scenario: &Path, overrides: &[String], out_dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let sc = LoadedScenario::load(scenario, overrides)?;
    let mut out = output::OutputDir::create(out_dir)?;
    let outcome = match command {
        Command::Simulate => commands::simulate(&sc, &mut out)?,
        Command::Validate => {
            let checks = suite::run(&sc)?;
            out.csv(
                "validate_report.csv",
                &["check", "expected", "got", "tolerance", "passed"].map(String::from),
                checks.iter().map(|c| {
                    vec![
                        c.id.clone(),
                        c.expected.clone(),
                        c.got.clone(),
                        output::num(c.tolerance),
                        c.passed.to_string(),
                    ]
                }),
            )?;
            Outcome::new(checks)
        }
        Command::Norms => commands::norms(&sc, &mut out)?,
        Command::Drift => commands::drift(&sc, &mut out)?,
        Command::Integrate => commands::integrate(&sc, &mut out)?,
    };
    out.manifest(
        command.name(),
        &sc,
        start.elapsed(),
        outcome.passed(),
        outcome.summary.clone(),
    )?;
    Ok(outcome)
}
