use std::path::Path;

use kamlab_core::renorm::*;
use kamlab_core::trees::{resonant_fixture_schedule, Catalog, Cutoff};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let cut = Cutoff::from_schedule(resonant_fixture_schedule(60).ctx("fixture")?, 0, cfg.precision_bits).ctx("fixture cutoff")?;
    let fams = fixture_families(&cut).ctx("fixture families")?;
    let mut rows = Vec::new();
    let mut dump = serde_json::Map::new();
    for (name, f) in &fams {
        let c = cancellation_check(f);
        b.check(format!("fixture_cancellation[{name}]"), c.pass && c.relative < CANCELLATION_TOL, &c);
        dump.insert(name.clone(), json!({"record": f.record, "members": f.members.len(), "reattachment_choices": f.reattachment_choices}));
        rows.push(c);
    }
    let cat = Catalog::new(cfg.renorm_k_max.max(1)).ctx("catalog")?;
    let scan = cancellation_scan(&cat, &cut, cfg.renorm_k_max).ctx("cancellation scan")?;
    b.check(
        "scan_cancellation",
        scan.pass() && scan.max_relative < CANCELLATION_TOL,
        json!({
            "k_max": scan.k_max,
            "trees": scan.trees,
            "resonances": scan.resonances,
            "first_generation": scan.first_generation,
            "checked": scan.checked,
            "over_budget": scan.over_budget,
            "singular": scan.singular,
            "max_relative": scan.max_relative,
            "failures": scan.failures,
        }),
    );
    rows.extend(scan.reports);
    write_cancellation_csv(&out.join("renorm_cancellation.csv"), &rows).ctx("cancellation csv")?;
    b.artifact("renorm_cancellation.csv");
    b.result("fixtures", dump);
    Ok(b)
}
