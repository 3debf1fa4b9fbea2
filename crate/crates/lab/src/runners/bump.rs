use std::f64::consts::PI;
use std::path::Path;

use kamlab_core::gevrey::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let params = GevreyParams::new(cfg.alpha, cfg.gevrey_l).ctx("gevrey params")?;
    let bump = Bump::new(params, cfg.bump_delta, cfg.bump_tau).ctx("bump")?;
    b.result("bump", bump);
    b.result("lambda0", params.lambda0());

    let t = tabulate(&bump, cfg.bump_points);
    write_bump_csv(&out.join("bump_table.csv"), &t).ctx("bump csv")?;
    b.artifact("bump_table.csv");
    b.result("clamped", t.clamped);

    let (lo, hi) = bump.support();
    let outside = t.rows.iter().filter(|r| r.x < lo || r.x > hi).all(|r| r.xi == 0.0);
    let edges = bump.xi(lo) == 0.0 && bump.xi(hi) == 0.0 && bump.xi(lo.next_down()) == 0.0 && bump.xi(hi.next_up()) == 0.0;
    b.check("support_exact", outside && edges, json!({"support": [lo, hi]}));

    let closed = bump.max_value();
    let hp = bump.peak_hp();
    let rel = if closed > 0.0 { ((hp - closed) / closed).abs().max(((bump.xi(bump.tau) - closed) / closed).abs()) } else { f64::INFINITY };
    b.check("peak_identity", rel < 1e-10, json!({"closed_form": closed, "definition_hp": hp, "relative": rel}));
    let n = 100_000;
    let arg = (0..=n).map(|i| i as f64 / n as f64).max_by(|x, y| bump.xi(*x).total_cmp(&bump.xi(*y))).unwrap();
    b.check("grid_argmax_at_tau", (arg - bump.tau).abs() <= 1.0 / n as f64 || closed == 0.0, json!({"argmax": arg}));

    let lambda = params.lambda();
    let mut rows = Vec::new();
    for (lam, p) in [(1.0, 1.0), (lambda, params.p())] {
        let sigma = PI / 4.0 * (1.0f64).min(1.0 / p);
        rows.extend(fd_bound_check(lam, p, sigma, cfg.fd_k_max, 2.0, 400).into_iter().map(|r| (lam, p, r)));
    }
    let worst = rows.iter().map(|(_, _, r)| r.ratio).fold(0.0, f64::max);
    b.check("finite_differences_within_bound", worst <= 1.05, json!({"max_ratio": worst}));
    b.result("fd_rows", rows.iter().map(|(l, p, r)| json!({"lambda": l, "p": p, "row": r})).collect::<Vec<_>>());

    let norm = bump.norm_truncated(cfg.norm_k_max).ctx("norm")?;
    b.result("norm", &norm);
    let ladder: Vec<f64> = (1..8).map(|m| Bump::for_level(params, cfg.b, cfg.beta, m, 0.5).and_then(|x| x.norm_truncated(cfg.norm_k_max)).map(|r| r.ln_value)).collect::<kamlab_core::Result<_>>().ctx("level norms")?;
    b.check("level_norms_decrease", ladder.windows(2).all(|w| w[1] < w[0]), json!({"ln_norms": ladder}));
    Ok(b)
}
