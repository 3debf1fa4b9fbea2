use std::path::Path;

use kamlab_core::lindstedt::*;
use rand::Rng;
use serde_json::json;

use super::{level_of, rng, rotation};
use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

const SLOPE_TOL: f64 = 0.2;

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let (s, w) = rotation(cfg, cfg.omega)?;
    let m = level_of(&s, cfg.qm)?;
    let table = compute_coefficients(&w, cfg.qm, cfg.k).ctx("lindstedt coefficients")?;
    std::fs::write(out.join("lindstedt_coefficients.json"), format!("{}\n", table.to_json())).map_err(|e| LabError::Io(e.to_string()))?;
    b.artifact("lindstedt_coefficients.json");
    b.result("m", m);
    b.result("zero_mode_leak", table.zero_mode_leak);

    let mut r = rng(cfg);
    let mut thetas = theta_grid(cfg.invariance_samples);
    thetas.extend((0..8).map(|_| r.gen_range(0.0..1.0)));
    let eps = cfg.eps;
    let (mut imag, mut odd, mut mean) = (0.0f64, 0.0f64, 0.0f64);
    for th in &thetas {
        let z = table.u_complex(th, &eps);
        imag = imag.max(z.im.abs());
        odd = odd.max((table.u(&-th, &eps) + z.re).abs());
    }
    let grid = theta_grid(cfg.grid_size.max(8 * cfg.k));
    for th in &grid {
        mean += table.u(th, &eps) / grid.len() as f64;
    }
    b.check("reality_oddness_mean", imag < 1e-12 && odd < 1e-12 && mean.abs() < 1e-12, json!({"max_imag": imag, "max_odd": odd, "mean": mean}));
    b.check("zero_eps_is_trivial", table.residual(0.0, &grid) == 0.0 && table.u(&0.3, &0.0) == 0.0, json!({}));

    let eg = theta_grid(cfg.grid_size);
    let n = cfg.eps_points;
    let (l0, l1) = (cfg.eps_range[0].ln(), cfg.eps_range[1].ln());
    let eps_list: Vec<f64> = (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect();
    let mut slopes = Vec::new();
    for &k in &cfg.residual_orders {
        let t = compute_coefficients_in::<Hp>(&w, cfg.qm, k).ctx("high-precision coefficients")?;
        let res: Vec<f64> = eps_list.iter().map(|e| t.residual(*e, &eg)).collect();
        let slope = loglog_slope(&eps_list, &res);
        b.check(format!("residual_slope[K={k}]"), (slope - (k as f64 + 1.0)).abs() <= SLOPE_TOL, json!({"slope": slope, "expected": k + 1, "residuals": res}));
        slopes.push(json!({"K": k, "slope": slope}));
    }
    b.result("eps_list", &eps_list);
    b.result("slopes", slopes);

    let radius = table.radius_estimate();
    write_radius_csv(&out.join("lindstedt_radius.csv"), &radius).ctx("radius csv")?;
    b.artifact("lindstedt_radius.csv");
    let spread = radius.tail_spread(5);
    b.check("radius_stabilizes", radius.infinite || spread < 0.1, json!({"rho": radius.rho, "tail_spread": spread}));
    b.result("radius", &radius);

    let bound = bound_report(&table, &s, m).ctx("bound report")?;
    b.check("bound_report", bound.pass && bound.fitted_constant.is_finite(), &bound);

    if radius.rho.is_finite() {
        let inv = circle_invariance(&table, radius.rho / 2.0, &thetas).ctx("circle invariance")?;
        b.check("circle_invariance", inv.max_error < 10.0 * inv.series_residual, &inv);
    }
    let at_eps = circle_invariance(&table, eps, &thetas).ctx("circle invariance")?;
    b.result("invariance_at_eps", at_eps);
    Ok(b)
}
