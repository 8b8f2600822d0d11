//! CSV and manifest writers. Floats use Rust's shortest round-trip formatting,
//! so identical numbers always produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::LoadedScenario;
use crate::CliError;

/// Formats a float for CSV; NaN becomes an empty field.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Collects the files written by one command.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(root.to_path_buf(), e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes a CSV file from a header and rows of already formatted fields.
    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        }
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Csv(path.clone(), e))?;
        w.write_record(header).map_err(|e| CliError::Csv(path.clone(), e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::Csv(path.clone(), e))?;
        }
        w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn curve(&mut self, name: &str, curve: &levyterm_core::ForwardCurve) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        }
        curve.save_csv(&path)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.toml` describing the run.
    pub fn manifest(
        &mut self,
        command: &str,
        scenario: &LoadedScenario,
        wall_time: Duration,
        passed: bool,
        summary: Vec<(String, f64)>,
    ) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Run<'a> {
            tool: &'static str,
            tool_version: &'static str,
            core_version: &'static str,
            command: &'a str,
            scenario_path: String,
            seed: u64,
            overrides: &'a [String],
            wall_time_seconds: f64,
            passed: bool,
            outputs: &'a [String],
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            run: Run<'a>,
            summary: toml::Table,
            scenario: &'a crate::config::ScenarioFile,
        }
        let mut outputs = self.written.clone();
        outputs.push("manifest.toml".into());
        let summary = summary.into_iter().map(|(k, v)| (k, toml::Value::Float(v))).collect();
        let m = Manifest {
            run: Run {
                tool: "levyterm",
                tool_version: env!("CARGO_PKG_VERSION"),
                core_version: levyterm_core::VERSION,
                command,
                scenario_path: scenario.path.display().to_string(),
                seed: scenario.file.seed,
                overrides: &scenario.overrides,
                wall_time_seconds: wall_time.as_secs_f64(),
                passed,
                outputs: &outputs,
            },
            summary,
            scenario: &scenario.file,
        };
        let text = toml::to_string_pretty(&m).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.root.join("manifest.toml");
        fs::write(&path, text).map_err(|e| CliError::Io(path, e))?;
        Ok(())
    }
}
