use std::path::Path;

use kamlab_core::aubry::*;
use kamlab_core::gevrey::{Bump, GevreyParams};
use kamlab_core::twist::GeneratingFamily;
use rand::Rng;
use serde_json::json;

use super::rng;
use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

const BARRIER_TOL: f64 = 1e-9;
const INTEGRABLE_TOL: f64 = 1e-10;

fn scan(solver: &BarrierSolver, xis: &[f64], what: &str) -> Result<Vec<BarrierValue>, LabError> {
    xis.iter().map(|x| solver.at(*x).ctx(what)).collect()
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let params = GevreyParams::new(cfg.alpha, cfg.gevrey_l).ctx("gevrey params")?;
    let mut r = rng(cfg);
    let mut xis: Vec<f64> = (0..cfg.xi_points).map(|i| i as f64 / cfg.xi_points as f64).collect();
    xis.extend((0..4).map(|_| r.gen_range(0.0..1.0)));

    let opts = HeteroclinicOptions::default();
    let integ = BarrierSolver::new(&GeneratingFamily::integrable(), Symbol::ZeroPlus, &opts).ctx("integrable barrier")?;
    let iv = scan(&integ, &xis, "integrable barrier")?;
    let imax = iv.iter().map(|v| v.value.abs()).fold(0.0, f64::max);
    b.check("integrable_barrier_zero", imax <= INTEGRABLE_TOL, json!({"max_abs": imax, "points": xis.len()}));

    let mut ladder = Vec::new();
    for (i, &width) in cfg.deltas.iter().enumerate() {
        let hyp = GeneratingFamily::hyperbolic(width * width);
        let free = minimize_heteroclinic(&hyp, &opts).ctx("heteroclinic minimization")?;
        let (tau, gap) = widest_gap(&free.x, cfg.tau_window[0], cfg.tau_window[1]);
        let bump = Bump::new(params, width, tau).ctx("bump")?;
        let fam = GeneratingFamily::hyperbolic_bump(width * width, bump);
        let bfree = minimize_heteroclinic(&fam, &opts).ctx("bump heteroclinic minimization")?;

        let (n, _) = resolve_span(&fam, &opts).ctx("span")?;
        let at = |n: usize| -> Result<BarrierValue, LabError> {
            BarrierSolver::new(&fam, Symbol::ZeroPlus, &HeteroclinicOptions { n: Some(n), ..opts }).ctx("bump barrier")?.at(tau).ctx("bump barrier")
        };
        let (v1, v2) = (at(n)?, at(2 * n)?);
        let xi_tau = bump.xi(tau);
        let tag = format!("Delta={width}");
        b.check(format!("bump_barrier_lower_bound[{tag}]"), v1.value >= xi_tau - BARRIER_TOL, json!({"barrier": v1.value, "xi_tau": xi_tau, "tau": tau}));
        b.check(format!("doubled_n_stability[{tag}]"), (v1.value - v2.value).abs() < BARRIER_TOL, json!({"n": n, "value_n": v1.value, "value_2n": v2.value}));

        let mut gaps = Vec::new();
        let mut gaps_ok = true;
        for (name, f, c) in [("hyperbolic", &hyp, &free), ("hyperbolic_bump", &fam, &bfree)] {
            let uw = uwith_slack(&c.x, |x| f.v(x));
            let ls = lowstep_slack(&c.x, width);
            gaps_ok &= uw >= -1e-12 && ls >= 0.0 && c.converged;
            gaps.push(json!({"family": name, "uwith_slack": uw, "lowstep_slack": ls, "residual": c.residual, "sites": c.x.len()}));
        }
        b.check(format!("step_gap_bounds[{tag}]"), gaps_ok, &gaps);

        let hs = BarrierSolver::new(&hyp, Symbol::ZeroPlus, &opts).ctx("hyperbolic barrier")?;
        let hv = scan(&hs, &xis, "hyperbolic barrier")?;
        let bs = BarrierSolver::new(&fam, Symbol::ZeroPlus, &opts).ctx("bump barrier")?;
        let bv = scan(&bs, &xis, "bump barrier")?;
        let hmin = hv.iter().chain(&bv).map(|v| v.value).fold(f64::INFINITY, f64::min);
        b.check(format!("barrier_nonnegative[{tag}]"), hmin >= -BARRIER_TOL, json!({"min": hmin}));
        let through_gap = hs.at(tau).ctx("hyperbolic barrier")?;

        let names = [format!("barrier_{i}_hyperbolic.csv"), format!("barrier_{i}_bump.csv"), format!("heteroclinic_{i}.csv")];
        write_barrier_csv(&out.join(&names[0]), &hv).ctx("barrier csv")?;
        write_barrier_csv(&out.join(&names[1]), &bv).ctx("barrier csv")?;
        write_configuration_csv(&out.join(&names[2]), &bfree.x).ctx("configuration csv")?;
        for nm in &names {
            b.artifact(nm);
        }
        ladder.push(json!({
            "Delta": width,
            "tau": tau,
            "gap": gap,
            "xi_tau": xi_tau,
            "bump_barrier": v1.value,
            "hyperbolic_barrier_through_gap": through_gap.value,
            "free_action": free.action,
            "bump_free_action": bfree.action,
        }));
    }
    b.result("ladder", ladder);
    b.result("xi_grid", &xis);
    Ok(b)
}
