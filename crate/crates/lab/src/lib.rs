//! Experiment orchestration for `kamlab`: configuration, dispatch and reports.

pub mod config;
pub mod report;
pub mod runners;

use std::path::Path;

use config::{Experiment, ExperimentConfig};
use kamlab_core::Error as CoreError;
use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("precision: {0}")]
    Precision(String),
    #[error("{check}: {message}")]
    Failed { check: String, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl LabError {
    /// Process exit code: 1 for failed checks, 2 for usage and precision errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Failed { .. } => 1,
            _ => 2,
        }
    }

    /// Wrap a core error raised while running `check`.
    pub fn core(check: &str, e: CoreError) -> Self {
        match e {
            CoreError::PrecisionExhausted(m) => LabError::Precision(format!("{check}: {m}")),
            CoreError::ExactLevelRequired(n) => LabError::Precision(format!("{check}: exact level {n} required")),
            CoreError::ScheduleOverflow { last_valid } => LabError::Precision(format!("{check}: schedule overflows after level {last_valid}")),
            CoreError::InvalidArgument(m) => LabError::Usage(format!("{check}: {m}")),
            CoreError::Io(m) => LabError::Io(m),
            other => LabError::Failed { check: check.to_string(), message: other.to_string() },
        }
    }
}

pub(crate) trait Ctx<T> {
    fn ctx(self, check: &str) -> Result<T, LabError>;
}

impl<T> Ctx<T> for kamlab_core::Result<T> {
    fn ctx(self, check: &str) -> Result<T, LabError> {
        self.map_err(|e| LabError::core(check, e))
    }
}

/// Validate, run one experiment and write its report into `out`.
pub fn execute(e: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<Report, LabError> {
    let mut cfg = cfg.clone();
    cfg.experiment = Some(e);
    cfg.validate(e)?;
    std::fs::create_dir_all(out).map_err(|err| LabError::Io(format!("{}: {err}", out.display())))?;
    let b = match e {
        Experiment::Arith => runners::arith::run(&cfg, out)?,
        Experiment::Barrier => runners::barrier::run(&cfg, out)?,
        Experiment::Lindstedt => runners::lindstedt::run(&cfg, out)?,
        Experiment::Trees => runners::trees::run(&cfg, out)?,
        Experiment::Renorm => runners::renorm::run(&cfg, out)?,
        Experiment::Bump => runners::bump::run(&cfg, out)?,
        Experiment::Orbit => runners::orbit::run(&cfg, out)?,
    };
    let report = b.finish(&cfg, e.name());
    report.write(out)?;
    Ok(report)
}
