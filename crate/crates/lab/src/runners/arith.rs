use std::path::Path;

use kamlab_core::cf::*;
use num_bigint::BigInt;
use num_traits::One;
use serde_json::json;

use super::{io, toy_schedule};
use crate::config::ExperimentConfig;
use crate::report::Builder;
use crate::{Ctx, LabError};

const SLACK: f64 = 1e-12;

fn scan_detail(r: &ScanReport) -> serde_json::Value {
    json!({
        "checked": r.checked,
        "triggered": r.triggered,
        "counterexamples": r.counterexamples,
        "undecidable": r.undecidable,
    })
}

fn write_q_table(path: &Path, s: &Schedule) -> Result<(), LabError> {
    let mut w = io(csv::Writer::from_path(path), "q table")?;
    io(w.write_record(["n", "a", "q", "lnq_lo", "lnq_hi", "exact"]), "q table")?;
    for l in &s.levels {
        let a = l.a.as_ref().map(|x| x.to_string()).unwrap_or_default();
        let q = l.q.as_ref().map(|x| x.to_string()).unwrap_or_default();
        io(w.write_record([l.n.to_string(), a, q, l.lnq.lo.to_string(), l.lnq.hi.to_string(), l.exact.to_string()]), "q table")?;
    }
    io(w.flush(), "q table")
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Builder, LabError> {
    let mut b = Builder::default();
    let s = toy_schedule(cfg)?;
    let exact = s.exact_levels();
    b.check("b_above_four", true, json!({"b": cfg.b, "b_gt_4": cfg.b > 4.0, "reported_only": true}));
    b.result("schedule", s.to_json());
    b.result("levels_computed", s.last());
    b.result("exact_levels", exact);
    write_q_table(&out.join("arith_q_table.csv"), &s)?;
    b.artifact("arith_q_table.csv");

    let w = RotationValue::from_schedule(&s, cfg.precision_bits).ctx("rotation enclosure")?;
    b.result("omega", json!({"lo": w.lo_f64(), "hi": w.hi_f64(), "precision_bits": w.precision_bits, "level": w.level}));

    let mut sums = Vec::new();
    let (m_lo, m_hi) = (cfg.m_range[0], cfg.m_range[1].min(s.last().saturating_sub(1)));
    for m in m_lo..=m_hi {
        for exponent in [1.0, cfg.beta] {
            for variant in [BrjunoVariant::Standard, BrjunoVariant::Differenced] {
                sums.push(brjuno_sum(&s, exponent, m, None, variant).ctx("brjuno_sum")?);
            }
        }
    }
    let dom: Vec<_> = sums.iter().filter(|r| r.exponent == 1.0 && r.variant == BrjunoVariant::Standard && r.m >= 1).collect();
    let worst = dom.iter().map(|r| r.ratio_to_first.hi).fold(0.0, f64::max);
    b.check("brjuno_first_term_domination", dom.iter().all(|r| r.ratio_to_first.hi <= 2.0), json!({"max_ratio": worst, "levels": dom.iter().map(|r| r.m).collect::<Vec<_>>()}));
    let growth: Vec<_> = sums.iter().filter(|r| r.exponent == cfg.beta && r.variant == BrjunoVariant::Standard).collect();
    let min_term = growth.iter().flat_map(|r| r.terms.iter().map(|t| t.lo)).fold(f64::INFINITY, f64::min);
    b.check("brjuno_beta_growth", min_term >= cfg.b / 2.0 - SLACK, json!({"min_increment": min_term, "required": cfg.b / 2.0}));
    b.result("brjuno_sums", &sums);

    let p = NeveParams { a: cfg.a, b: cfg.b, beta: cfg.beta, eps: cfg.eps };
    let mut neve = Vec::new();
    for m in 0..s.last() {
        neve.push(check_neve(&s, &p, m).ctx(&format!("neve m = {m}"))?);
    }
    let failing: Vec<usize> = neve.iter().filter(|r| !r.pass).map(|r| r.m).collect();
    b.check("neve", failing.is_empty(), json!({"levels": neve.len(), "failing": failing}));
    b.result("neve", &neve);

    let mut small = Vec::new();
    let mut all_pass = true;
    for m in m_lo..=cfg.m_range[1] {
        if m + 2 > exact {
            break;
        }
        let n_max = cfg.divisor_n_max.min(exact - 2 - m);
        let r = small_divisor_scan(&w, &s, m, n_max, cfg.vmax).ctx("small divisor scan")?;
        all_pass &= r.pass();
        small.push(json!({"m": m, "n_max": n_max, "scan": scan_detail(&r)}));
    }
    b.check("small_divisor_scan", all_pass && !small.is_empty(), &small);

    let a1_is_one = s.levels.get(1).and_then(|l| l.a.as_ref()).map(|a| a.is_one()).unwrap_or(false);
    let n_min = usize::from(a1_is_one);
    let top = exact.saturating_sub(2);
    let cb = convergent_bounds_scan(&w, &s, n_min, top).ctx("convergent bounds")?;
    b.check("convergent_bounds", cb.pass(), scan_detail(&cb));
    let ba = best_approximation_scan(&w, &s, n_min, top, cfg.vmax).ctx("best approximation")?;
    b.check("best_approximation", ba.pass(), scan_detail(&ba));

    let kap: Vec<_> = (0..exact.saturating_sub(1))
        .map(|n| kappa(&s, n, 0).map(|k: BigInt| k.to_string()))
        .collect::<kamlab_core::Result<_>>()
        .ctx("kappa")?;
    b.result("kappa_m0", kap);
    Ok(b)
}
