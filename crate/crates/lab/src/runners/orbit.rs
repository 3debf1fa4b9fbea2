use std::path::Path;

use kamlab_core::twist::*;
use rand::Rng;
use serde_json::json;

use super::rng;
use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let fam = GeneratingFamily::hyperbolic(cfg.orbit_delta);
    let map = CylinderMap::new(fam.clone());
    let o = map.orbit((cfg.orbit_start[0], cfg.orbit_start[1]), cfg.orbit_steps);
    write_orbit_csv(&out.join("orbit.csv"), &o).ctx("orbit csv")?;
    b.artifact("orbit.csv");
    b.result("final_point", o.last().map(|p| [p.x, p.y]));

    let mut r = rng(cfg);
    let samples: Vec<(f64, f64)> = (0..cfg.symplectic_samples).map(|_| (r.gen_range(-1.0..2.0), r.gen_range(-2.0..2.0))).collect();
    let rep = check_exact_symplectic(&map, &samples, 1e-10);
    b.check("exact_symplectic", rep.pass, &rep);
    let faulty = check_exact_symplectic(&CylinderMap::with_kick_offset(fam.clone(), 1e-6), &samples, 1e-10);
    b.check("fault_injection_detected", !faulty.pass && faulty.witness.is_some(), &faulty);

    let mut lift = 0.0f64;
    for &(x, y) in samples.iter().take(1000) {
        let (a, c) = map.step((x, y));
        let (a1, c1) = map.step((x + 1.0, y));
        lift = lift.max((a1 - a - 1.0).abs()).max((c1 - c).abs());
    }
    b.check("lift_property", lift < 1e-9, json!({"max_error": lift}));
    Ok(b)
}
