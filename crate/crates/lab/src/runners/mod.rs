//! One runner per experiment; each returns the checks and results of its report.

pub mod arith;
pub mod barrier;
pub mod bump;
pub mod lindstedt;
pub mod orbit;
pub mod renorm;
pub mod trees;

use kamlab_core::cf::{omega_bar_up_to, RotationValue, Schedule};
use kamlab_core::trees::resonant_fixture_schedule;
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, OmegaChoice};
use crate::{Ctx, LabError};

pub(crate) fn rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

pub(crate) fn toy_schedule(cfg: &ExperimentConfig) -> Result<Schedule, LabError> {
    omega_bar_up_to(cfg.b, cfg.beta, cfg.levels, cfg.digit_budget).ctx("omega_bar")
}

/// Schedule and enclosure of the configured rotation number.
pub(crate) fn rotation(cfg: &ExperimentConfig, choice: OmegaChoice) -> Result<(Schedule, RotationValue), LabError> {
    let s = match choice {
        OmegaChoice::Golden => Schedule::golden(80),
        OmegaChoice::Toy => toy_schedule(cfg)?,
        OmegaChoice::Fixture => resonant_fixture_schedule(60).ctx("fixture schedule")?,
    };
    let w = match choice {
        OmegaChoice::Golden => RotationValue::golden(cfg.precision_bits),
        _ => RotationValue::from_schedule(&s, cfg.precision_bits).ctx("rotation enclosure")?,
    };
    Ok((s, w))
}

/// Smallest level `m` with `q_m = qm`.
pub(crate) fn level_of(s: &Schedule, qm: u64) -> Result<usize, LabError> {
    let target = BigInt::from(qm);
    (0..s.exact_levels())
        .find(|&m| s.q(m).map(|q| *q == target).unwrap_or(false))
        .ok_or_else(|| LabError::Usage(format!("qm = {qm} is not a convergent denominator of the schedule")))
}

pub(crate) fn io<T>(r: Result<T, impl std::fmt::Display>, what: &str) -> Result<T, LabError> {
    r.map_err(|e| LabError::Io(format!("{what}: {e}")))
}
