//! End-to-end acceptance run: every experiment through the `kamlab` binary, twice.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

const EXPERIMENTS: [&str; 7] = ["arith", "bump", "orbit", "lindstedt", "trees", "renorm", "barrier"];

struct Run {
    reports: BTreeMap<String, Value>,
    elapsed: BTreeMap<String, Duration>,
}

fn run_all(dir: &Path) -> Run {
    let mut reports = BTreeMap::new();
    let mut elapsed = BTreeMap::new();
    for e in EXPERIMENTS {
        let out = dir.join(e);
        let t = Instant::now();
        let st = Command::new(env!("CARGO_BIN_EXE_kamlab"))
            .args([e, "--out"])
            .arg(&out)
            .env("KAMLAB_GIT_DESCRIBE", "acceptance")
            .output()
            .expect("spawn kamlab");
        elapsed.insert(e.to_string(), t.elapsed());
        assert!(st.status.code().is_some(), "{e} terminated by signal");
        let text = std::fs::read_to_string(out.join(format!("{e}.json"))).unwrap_or_else(|_| panic!("{e}: no report; stderr: {}", String::from_utf8_lossy(&st.stderr)));
        reports.insert(e.to_string(), serde_json::from_str(&text).unwrap());
    }
    Run { reports, elapsed }
}

fn check<'a>(r: &'a Run, exp: &str, name: &str) -> &'a Value {
    r.reports[exp]["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("{exp}: missing check {name}"))
}

fn passed(r: &Run, exp: &str, name: &str) -> bool {
    check(r, exp, name)["pass"].as_bool().unwrap()
}

fn detail<'a>(r: &'a Run, exp: &str, name: &str) -> &'a Value {
    &check(r, exp, name)["detail"]
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn empty(v: &Value) -> bool {
    v.as_array().map(|a| a.is_empty()).unwrap_or(false)
}

/// Undecidable entries are acceptable only if they carry the enclosure they were decided on.
fn widths_reported(v: &Value) -> bool {
    v.as_array().unwrap().iter().all(|u| u["dist"]["lo"].is_number() && u["dist"]["hi"].is_number())
}

fn scan_clean(v: &Value) -> bool {
    empty(&v["counterexamples"]) && widths_reported(&v["undecidable"])
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
        }
    }
    out
}

fn c1(r: &Run) -> (bool, String) {
    let d = detail(r, "trees", "sum_rule");
    let t = r.elapsed["trees"];
    let ok = passed(r, "trees", "sum_rule") && f(&d["max_rel_err"]) < 1e-9 && d["cases"].as_u64() > Some(0) && t < Duration::from_secs(120);
    (ok, format!("max rel err {:e} over {} cases; trees run {:.1}s", f(&d["max_rel_err"]), d["cases"], t.as_secs_f64()))
}

fn c2(r: &Run) -> (bool, String) {
    let mut ok = true;
    let mut s = Vec::new();
    for k in [2u64, 3, 4] {
        let name = format!("residual_slope[K={k}]");
        let slope = f(&detail(r, "lindstedt", &name)["slope"]);
        ok &= passed(r, "lindstedt", &name) && (slope - (k + 1) as f64).abs() <= 0.2;
        s.push(format!("K={k}: {slope:.4}"));
    }
    let range = &r.reports["lindstedt"]["config"]["eps_range"];
    ok &= f(&range[0]) == 1e-4 && f(&range[1]) == 1e-2;
    (ok, s.join(", "))
}

fn c3(r: &Run) -> (bool, String) {
    let mut ok = r.elapsed["trees"] < Duration::from_secs(600);
    let mut s = Vec::new();
    for w in ["golden", "toy"] {
        let d = detail(r, "trees", &format!("siegel_brjuno[{w}]"));
        ok &= passed(r, "trees", &format!("siegel_brjuno[{w}]")) && d["violations"] == 0 && d["k_max"] == 8;
        s.push(format!("{w}: {} trees, {} violations", d["trees"], d["violations"]));
    }
    (ok, format!("{}; trees run {:.1}s", s.join(", "), r.elapsed["trees"].as_secs_f64()))
}

fn c4(r: &Run) -> (bool, String) {
    let sd = detail(r, "arith", "small_divisor_scan").as_array().unwrap();
    let mut ok = !sd.is_empty() && sd.iter().all(|row| scan_clean(&row["scan"]) && row["n_max"].as_u64() <= Some(3));
    let cfg = &r.reports["arith"]["config"];
    ok &= f(&cfg["vmax"]) == 1e4 && cfg["divisor_n_max"] == 3;
    for name in ["convergent_bounds", "best_approximation"] {
        ok &= passed(r, "arith", name) && scan_clean(detail(r, "arith", name));
    }
    ok &= passed(r, "arith", "small_divisor_scan") && passed(r, "trees", "scale_range") && scan_clean(detail(r, "trees", "scale_range"));
    let und = detail(r, "arith", "convergent_bounds")["undecidable"].as_array().unwrap().len();
    (ok, format!("{} small-divisor levels, scale range checked {}, {und} undecidable with widths", sd.len(), detail(r, "trees", "scale_range")["checked"]))
}

fn c5(r: &Run) -> (bool, String) {
    let neve = detail(r, "arith", "neve");
    let dom = detail(r, "arith", "brjuno_first_term_domination");
    let gr = detail(r, "arith", "brjuno_beta_growth");
    let b = f(&r.reports["arith"]["config"]["b"]);
    let ok = passed(r, "arith", "neve")
        && empty(&neve["failing"])
        && passed(r, "arith", "brjuno_first_term_domination")
        && f(&dom["max_ratio"]) <= 2.0
        && passed(r, "arith", "brjuno_beta_growth")
        && f(&gr["min_increment"]) >= b / 2.0 - 1e-12;
    (ok, format!("neve over {} levels, domination ratio {:.4}, min increment {:.4} vs b/2 = {}", neve["levels"], f(&dom["max_ratio"]), f(&gr["min_increment"]), b / 2.0))
}

fn c6(r: &Run) -> (bool, String) {
    let mut ok = passed(r, "barrier", "integrable_barrier_zero") && f(&detail(r, "barrier", "integrable_barrier_zero")["max_abs"]) <= 1e-10;
    let mut s = Vec::new();
    for w in ["0.2", "0.1", "0.05"] {
        let tag = format!("[Delta={w}]");
        let lb = detail(r, "barrier", &format!("bump_barrier_lower_bound{tag}"));
        let dn = detail(r, "barrier", &format!("doubled_n_stability{tag}"));
        let gaps = detail(r, "barrier", &format!("step_gap_bounds{tag}")).as_array().unwrap();
        ok &= f(&lb["barrier"]) >= f(&lb["xi_tau"]) - 1e-9;
        ok &= (f(&dn["value_n"]) - f(&dn["value_2n"])).abs() < 1e-9;
        ok &= gaps.iter().all(|g| f(&g["uwith_slack"]) >= -1e-12 && f(&g["lowstep_slack"]) >= 0.0);
        ok &= ["bump_barrier_lower_bound", "doubled_n_stability", "step_gap_bounds", "barrier_nonnegative"].iter().all(|c| passed(r, "barrier", &format!("{c}{tag}")));
        s.push(format!("Delta={w}: {:.3e} >= {:.3e}", f(&lb["barrier"]), f(&lb["xi_tau"])));
    }
    (ok, s.join(", "))
}

fn c7(r: &Run) -> (bool, String) {
    let rad = detail(r, "lindstedt", "radius_stabilizes");
    let inv = detail(r, "lindstedt", "circle_invariance");
    let br = detail(r, "lindstedt", "bound_report");
    let cfg = &r.reports["lindstedt"]["config"];
    let ok = cfg["K"] == 20
        && cfg["omega"] == "golden"
        && cfg["qm"] == 1
        && passed(r, "lindstedt", "radius_stabilizes")
        && f(&rad["tail_spread"]) < 0.1
        && passed(r, "lindstedt", "circle_invariance")
        && (f(&inv["eps"]) - f(&rad["rho"]) / 2.0).abs() <= 1e-12 * f(&rad["rho"])
        && f(&inv["max_error"]) < 10.0 * f(&inv["series_residual"])
        && passed(r, "lindstedt", "bound_report")
        && f(&br["fitted_constant"]).is_finite();
    (ok, format!("rho {:.4}, spread {:.4}, invariance {:.2e} vs series {:.2e}, C {:.3e}", f(&rad["rho"]), f(&rad["tail_spread"]), f(&inv["max_error"]), f(&inv["series_residual"]), f(&br["fitted_constant"])))
}

fn c8(r: &Run) -> (bool, String) {
    let checks = r.reports["renorm"]["checks"].as_array().unwrap();
    let fixtures: Vec<&Value> = checks.iter().filter(|c| c["name"].as_str().unwrap().starts_with("fixture_cancellation")).collect();
    let scan = detail(r, "renorm", "scan_cancellation");
    let ok = !fixtures.is_empty()
        && fixtures.iter().all(|c| c["pass"] == true && f(&c["detail"]["relative"]) < 1e-9)
        && passed(r, "renorm", "scan_cancellation")
        && scan["k_max"] == 7
        && f(&scan["max_relative"]) < 1e-9
        && empty(&scan["failures"]);
    (ok, format!("{} fixtures, {} first-generation resonances, max relative {:e}", fixtures.len(), scan["first_generation"], f(&scan["max_relative"])))
}

fn c9(r: &Run) -> (bool, String) {
    let fd = detail(r, "bump", "finite_differences_within_bound");
    let pk = detail(r, "bump", "peak_identity");
    let ok = passed(r, "bump", "finite_differences_within_bound")
        && f(&fd["max_ratio"]) <= 1.05
        && r.reports["bump"]["config"]["fd_k_max"].as_u64() >= Some(5)
        && passed(r, "bump", "peak_identity")
        && f(&pk["relative"]) < 1e-10
        && passed(r, "bump", "support_exact");
    (ok, format!("FD ratio {:.4}, peak relative {:e}", f(&fd["max_ratio"]), f(&pk["relative"])))
}

#[test]
fn acceptance() {
    let root = tempfile::tempdir().unwrap();
    let a = run_all(&root.path().join("a"));
    let _b = run_all(&root.path().join("b"));
    let (fa, fb) = (files(&root.path().join("a")), files(&root.path().join("b")));
    let differing: Vec<String> = fa.keys().chain(fb.keys()).filter(|k| fa.get(*k) != fb.get(*k)).map(|k| k.display().to_string()).collect();
    let c10 = (differing.is_empty() && fa.len() > EXPERIMENTS.len(), format!("{} files compared, {} differ {:?}", fa.len(), differing.len(), differing));

    let results = [
        ("1 oracle equivalence", c1(&a)),
        ("2 residual scaling", c2(&a)),
        ("3 Siegel-Brjuno scan", c3(&a)),
        ("4 arithmetic scans", c4(&a)),
        ("5 Brjuno construction", c5(&a)),
        ("6 destruction surrogate", c6(&a)),
        ("7 persistence surrogate", c7(&a)),
        ("8 resonance cancellation", c8(&a)),
        ("9 Gevrey suite", c9(&a)),
        ("10 determinism", c10),
    ];
    for (name, (ok, msg)) in &results {
        println!("{} criterion {name}: {msg}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
