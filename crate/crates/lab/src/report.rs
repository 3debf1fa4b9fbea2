//! Versioned JSON reports.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::LabError;

pub const SCHEMA: &str = "kamlab/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub experiment: String,
    pub git_describe: String,
    pub precision: Value,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    /// Files written next to the report, relative to the output directory.
    pub artifacts: Vec<String>,
}

/// Incrementally assembled report contents.
#[derive(Debug, Default)]
pub struct Builder {
    pub checks: Vec<Check>,
    pub results: serde_json::Map<String, Value>,
    pub artifacts: Vec<String>,
}

impl Builder {
    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Serialize) {
        let detail = serde_json::to_value(detail).expect("serializable detail");
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    pub fn result(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(v).expect("serializable result"));
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn finish(self, cfg: &ExperimentConfig, experiment: &str) -> Report {
        let pass = self.checks.iter().all(|c| c.pass);
        Report {
            schema: SCHEMA,
            experiment: experiment.to_string(),
            git_describe: git_describe(),
            precision: json!({
                "enclosure_bits": cfg.precision_bits,
                "high_precision_bits": kamlab_core::lindstedt::HP_BITS,
                "float": "binary64",
            }),
            config: cfg.clone(),
            pass,
            checks: self.checks,
            results: Value::Object(self.results),
            artifacts: self.artifacts,
        }
    }
}

/// `git describe` of the source tree, overridable through `KAMLAB_GIT_DESCRIBE`.
pub fn git_describe() -> String {
    if let Ok(v) = std::env::var("KAMLAB_GIT_DESCRIBE") {
        return v;
    }
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

impl Report {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf, LabError> {
        let path = dir.join(format!("{}.json", self.experiment));
        let mut text = serde_json::to_string_pretty(self).map_err(|e| LabError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
