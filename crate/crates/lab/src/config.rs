//! Experiment configuration: a flat JSON object with defaults for every field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Arith,
    Barrier,
    Lindstedt,
    Trees,
    Renorm,
    Bump,
    Orbit,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Arith => "arith",
            Experiment::Barrier => "barrier",
            Experiment::Lindstedt => "lindstedt",
            Experiment::Trees => "trees",
            Experiment::Renorm => "renorm",
            Experiment::Bump => "bump",
            Experiment::Orbit => "orbit",
        }
    }
}

/// Rotation number used by the Lindstedt and tree experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaChoice {
    Golden,
    /// `omega_bar` built from `b`, `beta`, `levels`.
    Toy,
    /// `[0; 3, 100, 1, 1, ...]`, whose small modes sit on positive scales.
    Fixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub precision_bits: u32,

    /// Gevrey class of the bump.
    pub alpha: f64,
    /// Gevrey radius `L`.
    pub gevrey_l: f64,
    /// Exponent `a` of the `n_{q_m}` threshold.
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub eps: f64,
    pub levels: usize,
    pub digit_budget: u64,
    pub m_range: [usize; 2],
    pub divisor_n_max: usize,
    pub vmax: i64,

    pub omega: OmegaChoice,
    pub qm: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub residual_orders: Vec<usize>,
    pub eps_range: [f64; 2],
    pub eps_points: usize,
    pub grid_size: usize,
    pub invariance_samples: usize,

    pub deltas: Vec<f64>,
    pub xi_points: usize,
    pub tau_window: [f64; 2],

    pub sum_k_max: usize,
    pub sum_qms: Vec<u64>,
    pub tree_k_max: usize,
    pub scale_n_max: usize,
    pub renorm_k_max: usize,

    pub bump_delta: f64,
    pub bump_tau: f64,
    pub bump_points: usize,
    pub fd_k_max: usize,
    pub norm_k_max: usize,

    pub orbit_delta: f64,
    pub orbit_start: [f64; 2],
    pub orbit_steps: usize,
    pub symplectic_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 0,
            precision_bits: 256,
            alpha: 22.0,
            gevrey_l: 0.01,
            a: 2.0,
            b: 1.0,
            beta: 0.5,
            eps: 0.05,
            levels: 8,
            digit_budget: 100_000,
            m_range: [0, 2],
            divisor_n_max: 3,
            vmax: 10_000,
            omega: OmegaChoice::Golden,
            qm: 1,
            k: 20,
            residual_orders: vec![2, 3, 4],
            eps_range: [1e-4, 1e-2],
            eps_points: 9,
            grid_size: 32,
            invariance_samples: 64,
            deltas: vec![0.2, 0.1, 0.05],
            xi_points: 16,
            tau_window: [0.375, 0.625],
            sum_k_max: 5,
            sum_qms: vec![1, 2],
            tree_k_max: 8,
            scale_n_max: 4,
            renorm_k_max: 7,
            bump_delta: 0.2,
            bump_tau: 0.45,
            bump_points: 1000,
            fd_k_max: 5,
            norm_k_max: 20,
            orbit_delta: 0.1,
            orbit_start: [0.2, 0.37],
            orbit_steps: 1000,
            symplectic_samples: 10_000,
        }
    }
}

fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Self, LabError> {
        serde_json::from_value(v).map_err(|e| usage(format!("invalid config: {e}")))
    }

    /// Apply `key=value` overrides; values are parsed as JSON, falling back to a string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self, LabError> {
        let mut v = serde_json::to_value(&self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| usage(format!("override `{o}` is not key=value")))?;
            let key = key.trim().replace('-', "_");
            let key = if key == "k" { "K".to_string() } else { key };
            if !obj.contains_key(&key) {
                return Err(usage(format!("unknown config key `{key}`")));
            }
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            obj.insert(key, val);
        }
        Self::from_value(v)
    }

    /// Check numeric preconditions of the selected experiment.
    pub fn validate(&self, e: Experiment) -> Result<(), LabError> {
        let pos = |name: &str, x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(usage(format!("{name} = {x} must be positive"))) };
        if self.precision_bits < 53 {
            return Err(usage(format!("precision_bits = {} is below binary64", self.precision_bits)));
        }
        match e {
            Experiment::Arith => {
                pos("b", self.b)?;
                pos("a", self.a)?;
                if !(self.beta > 0.0 && self.beta < 1.0) {
                    return Err(usage(format!("beta = {} must lie in (0, 1)", self.beta)));
                }
                if self.levels == 0 {
                    return Err(usage("levels must be at least 1"));
                }
                if self.m_range[0] > self.m_range[1] {
                    return Err(usage("m_range must be increasing"));
                }
                if self.vmax < 1 {
                    return Err(usage("vmax must be at least 1"));
                }
            }
            Experiment::Barrier => {
                if self.deltas.is_empty() {
                    return Err(usage("deltas must not be empty"));
                }
                for d in &self.deltas {
                    if !(*d > 0.0 && *d <= 1.0) {
                        return Err(usage(format!("Delta = {d} must lie in (0, 1]")));
                    }
                }
                if self.alpha <= 1.0 {
                    return Err(usage("alpha must exceed 1"));
                }
                pos("gevrey_l", self.gevrey_l)?;
                if self.xi_points < 2 {
                    return Err(usage("xi_points must be at least 2"));
                }
            }
            Experiment::Lindstedt => {
                if self.k == 0 {
                    return Err(usage("K must be at least 1"));
                }
                if self.qm == 0 {
                    return Err(usage("qm must be positive"));
                }
                if self.eps < 0.0 {
                    return Err(usage("eps must be non-negative"));
                }
                if !(self.eps_range[0] > 0.0 && self.eps_range[0] < self.eps_range[1]) || self.eps_points < 2 {
                    return Err(usage("eps_range must be an increasing positive pair with eps_points >= 2"));
                }
                if self.residual_orders.contains(&0) {
                    return Err(usage("residual orders must be positive"));
                }
                if self.grid_size == 0 || self.invariance_samples == 0 {
                    return Err(usage("grid sizes must be positive"));
                }
            }
            Experiment::Trees | Experiment::Renorm => {
                let top = kamlab_core::trees::MAX_ORDER;
                if self.tree_k_max == 0 || self.tree_k_max > top || self.sum_k_max == 0 || self.sum_k_max > top || self.renorm_k_max > top {
                    return Err(usage(format!("tree orders must lie in 1..={top}")));
                }
                if self.sum_qms.contains(&0) {
                    return Err(usage("sum_qms entries must be positive"));
                }
            }
            Experiment::Bump => {
                if self.alpha <= 1.0 {
                    return Err(usage("alpha must exceed 1"));
                }
                pos("gevrey_l", self.gevrey_l)?;
                if !(self.bump_delta > 0.0 && self.bump_delta <= 1.0) {
                    return Err(usage("bump_delta must lie in (0, 1]"));
                }
                if self.bump_points == 0 {
                    return Err(usage("bump_points must be positive"));
                }
            }
            Experiment::Orbit => {
                if self.orbit_delta < 0.0 {
                    return Err(usage("orbit_delta must be non-negative"));
                }
            }
        }
        Ok(())
    }
}
