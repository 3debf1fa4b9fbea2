use std::path::Path;

use kamlab_core::cf::{omega_bar_up_to, RotationValue, Schedule};
use kamlab_core::lindstedt::compute_coefficients;
use kamlab_core::trees::*;
use serde_json::json;

use super::level_of;
use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

const SUM_TOL: f64 = 1e-9;

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let k_top = cfg.sum_k_max.max(cfg.tree_k_max).max(1);
    let cat = Catalog::new(k_top).ctx("catalog")?;
    b.result("catalog_sizes", (1..=k_top).map(|k| cat.all_trees(k).map(|t| t.len())).collect::<kamlab_core::Result<Vec<_>>>().ctx("catalog")?);

    let golden = Schedule::golden(80);
    let omega = RotationValue::golden(cfg.precision_bits);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &qm in &cfg.sum_qms {
        let m = level_of(&golden, qm)?;
        let cut = Cutoff::new(golden.clone(), omega.clone(), m);
        let table = compute_coefficients(&omega, qm, cfg.sum_k_max).ctx("lindstedt coefficients")?;
        for k in 1..=cfg.sum_k_max {
            for j in (-(k as i64)..=k as i64).filter(|j| (k as i64 - j) % 2 == 0 && *j != 0) {
                let s = sum_check(&cat, &cut, qm, k, j * qm as i64, &table).ctx("sum rule")?;
                worst = worst.max(s.rel_err);
                rows.push(s);
            }
        }
    }
    b.check("sum_rule", worst < SUM_TOL, json!({"max_rel_err": worst, "cases": rows.len()}));
    b.result("sum_rule", &rows);

    let toy = omega_bar_up_to(cfg.b, cfg.beta, cfg.levels, cfg.digit_budget).ctx("omega_bar")?;
    let cutoffs = [
        ("golden", Cutoff::new(golden.clone(), omega.clone(), 0)),
        ("toy", Cutoff::from_schedule(toy, 0, cfg.precision_bits).ctx("toy cutoff")?),
        ("fixture", Cutoff::from_schedule(resonant_fixture_schedule(60).ctx("fixture")?, 0, cfg.precision_bits).ctx("fixture cutoff")?),
    ];
    let mut violations = Vec::new();
    for (name, cut) in &cutoffs {
        let scan = exhaustive_scan(&cat, cut, cfg.tree_k_max).ctx("exhaustive scan")?;
        b.check(
            format!("siegel_brjuno[{name}]"),
            scan.pass(),
            json!({
                "k_max": scan.k_max,
                "trees": scan.trees,
                "assignments": scan.assignments,
                "clusters": scan.clusters,
                "resonances": scan.resonances,
                "fitted_constant": scan.fitted_constant,
                "max_count_ratio": scan.max_count_ratio,
                "undecidable_lines": scan.undecidable_lines,
                "violations": scan.violations.len(),
            }),
        );
        violations.extend(scan.violations.into_iter().map(|v| json!({"omega": name, "kind": v.kind, "tree": v.tree})));
    }
    let sr = scale_range_scan(&cutoffs[0].1, cfg.scale_n_max, cfg.vmax).ctx("scale range scan")?;
    b.check("scale_range", sr.pass(), json!({"checked": sr.checked, "triggered": sr.triggered, "counterexamples": sr.counterexamples, "undecidable": sr.undecidable}));
    if !violations.is_empty() {
        std::fs::write(out.join("trees_violations.json"), format!("{}\n", serde_json::Value::Array(violations))).map_err(|e| LabError::Io(e.to_string()))?;
        b.artifact("trees_violations.json");
    }
    Ok(b)
}
