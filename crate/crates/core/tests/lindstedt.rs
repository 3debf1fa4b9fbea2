use std::collections::HashMap;
use std::f64::consts::PI;

use kamlab_core::cf::{brjuno_sum, omega_bar_up_to, BrjunoVariant, RotationValue, Schedule, DEFAULT_DIGIT_BUDGET};
use kamlab_core::lindstedt::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn golden() -> RotationValue {
    RotationValue::golden(256)
}

fn toy_omega() -> (Schedule, RotationValue) {
    let s = omega_bar_up_to(1.0, 0.5, 8, DEFAULT_DIGIT_BUDGET).unwrap();
    let w = RotationValue::from_schedule(&s, 256).unwrap();
    (s, w)
}

/// Ordered compositions of `n` into `l` positive parts.
fn compositions(n: usize, l: usize) -> Vec<Vec<usize>> {
    if l == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(l - 1) {
        for mut rest in compositions(n - first, l - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Explicit multinomial form of the recurrence, summed term by term.
fn explicit_oracle(w: &RotationValue, q: i64, k_max: usize) -> HashMap<(usize, i64), Complex64> {
    let mut u: HashMap<(usize, i64), Complex64> = HashMap::new();
    let i = Complex64::new(0.0, 1.0);
    for k in 1..=k_max {
        for j in -(k as i64)..=k as i64 {
            if j == 0 {
                continue;
            }
            let nu = j * q;
            let mut total = Complex64::new(0.0, 0.0);
            for sigma in [1i64, -1] {
                let nu0 = sigma * q;
                let pref = -i * nu0 as f64 / (2.0 * q as f64);
                let mut inner = Complex64::new(0.0, 0.0);
                for l in 0..k {
                    let mut fact = 1.0;
                    for t in 1..=l {
                        fact *= t as f64;
                    }
                    let coef = (i * 2.0 * PI * nu0 as f64).powu(l as u32) / fact;
                    for comp in compositions(k - 1, l) {
                        // Sum over modes of each factor with the total fixed.
                        let mut partial: HashMap<i64, Complex64> = HashMap::from([(nu0, Complex64::new(1.0, 0.0))]);
                        for &kj in &comp {
                            let mut next: HashMap<i64, Complex64> = HashMap::new();
                            for (tot, val) in &partial {
                                for mj in -(kj as i64)..=kj as i64 {
                                    if let Some(c) = u.get(&(kj, mj)) {
                                        *next.entry(tot + mj * q).or_default() += val * c;
                                    }
                                }
                            }
                            partial = next;
                        }
                        if let Some(v) = partial.get(&nu) {
                            inner += coef * v;
                        }
                    }
                }
                total += pref * inner;
            }
            let g = 2.0 * ((2.0 * PI * w.mid() * nu as f64).cos() - 1.0);
            u.insert((k, j), total / g);
        }
    }
    u
}

#[test]
fn golden_divisor_value() {
    let w = golden();
    let g = w.gamma(1).unwrap();
    let want = -3.474_737_756_156_639_7;
    assert!(g.contains(want));
    assert!((g.mid() - want).abs() < 1e-14);
    let mut o = DivisorOracle::new(w);
    assert!((o.gamma_in::<f64>(1).unwrap() - want).abs() < 1e-14);
    assert_eq!(o.gamma(0).unwrap().mid(), 0.0);
}

#[test]
fn rational_rotation_has_vanishing_divisor() {
    let w = RotationValue::from_f64_exact(0.25, 64);
    assert!(w.gamma(4).is_err());
    assert!(compute_coefficients(&w, 2, 3).is_err());
}

#[test]
fn divisor_lower_bound_scan() {
    let w = golden();
    for nu in 1..=10_000i64 {
        let g = w.gamma(nu).unwrap();
        let d = w.dist(nu).hi_f64();
        assert!(g.hi.abs() >= 16.0 * d * d * (1.0 - 1e-12), "nu = {nu}");
        assert!(g.hi < 0.0);
    }
}

#[test]
fn order_one_and_two_closed_forms() {
    let w = golden();
    for q in [1u64, 2] {
        let t = compute_coefficients(&w, q, 4).unwrap();
        let g1 = w.gamma(q as i64).unwrap().mid();
        let g2 = w.gamma(2 * q as i64).unwrap().mid();
        let u1 = t.coeff_c64(1, 1);
        assert!((u1 - Complex64::new(0.0, -1.0 / (2.0 * g1))).norm() < 1e-15);
        assert!((t.coeff_c64(1, -1) + u1).norm() < 1e-15);
        let u2 = t.coeff_c64(2, 2);
        let want = PI * q as f64 * u1 / g2;
        assert!((u2 - want).norm() < 1e-14 * want.norm());
        assert_eq!(t.coeff_c64(2, 1), Complex64::new(0.0, 0.0));
        assert_eq!(t.coeff_c64(2, -1), Complex64::new(0.0, 0.0));
    }
}

#[test]
fn recurrence_matches_explicit_oracle() {
    let w = golden();
    for q in [1u64, 2] {
        let t = compute_coefficients(&w, q, 5).unwrap();
        let o = explicit_oracle(&w, q as i64, 5);
        for ((k, j), want) in &o {
            let got = t.coeff_c64(*k, *j);
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-300), "k={k} j={j}: {got} vs {want}");
        }
    }
}

#[test]
fn high_precision_table_agrees() {
    let w = golden();
    let a = compute_coefficients(&w, 1, 10).unwrap();
    let b = compute_coefficients_in::<Hp>(&w, 1, 10).unwrap();
    for k in 1..=10 {
        for j in -10..=10 {
            let (x, y) = (a.coeff_c64(k, j), b.coeff_c64(k, j));
            assert!((x - y).norm() <= 1e-12 * y.norm().max(1e-300));
        }
    }
    assert!(a.zero_mode_leak < 1e-12);
    assert!(b.zero_mode_leak < 1e-60);
}

#[test]
fn evaluators_are_real_odd_and_mean_free() {
    let t = compute_coefficients(&golden(), 1, 8).unwrap();
    assert_eq!(t.u(&0.3, &0.0), 0.0);
    assert_eq!(t.v(&0.3, &0.0), 0.0);
    let eps = 0.05;
    let grid = theta_grid(64);
    let mut mean = 0.0;
    for th in &grid {
        let z = t.u_complex(th, &eps);
        assert!(z.im.abs() < 1e-12);
        assert!((t.u(&-th, &eps) + z.re).abs() < 1e-12);
        mean += z.re / grid.len() as f64;
    }
    assert!(mean.abs() < 1e-12);
}

#[test]
fn residual_scaling() {
    let w = golden();
    let grid = theta_grid(32);
    let t = compute_coefficients(&w, 1, 3).unwrap();
    assert_eq!(t.residual(0.0, &grid), 0.0);
    let ratio = t.residual(1e-3, &grid) / t.residual(1e-4, &grid);
    assert!((ratio / 1e4 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn first_order_residual_is_the_taylor_term() {
    let w = golden();
    let t = compute_coefficients(&w, 1, 1).unwrap();
    let grid = theta_grid(64);
    let eps = 1e-5;
    let lead = grid
        .iter()
        .map(|th| {
            let u1 = t.u_order_complex(1, th).re;
            (eps * eps * 2.0 * PI * u1 * (2.0 * PI * th).cos()).abs()
        })
        .fold(0.0, f64::max);
    let r = t.residual(eps, &grid);
    assert!((r / lead - 1.0).abs() < 1e-3, "{r} vs {lead}");
}

#[test]
fn residual_slopes_in_high_precision() {
    let w = golden();
    let grid = theta_grid(32);
    let eps: Vec<f64> = (0..=8).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
    for k in [2usize, 3, 4] {
        let t = compute_coefficients_in::<Hp>(&w, 1, k).unwrap();
        let res: Vec<f64> = eps.iter().map(|e| t.residual(*e, &grid)).collect();
        let slope = loglog_slope(&eps, &res);
        assert!((slope - (k as f64 + 1.0)).abs() <= 0.2, "K={k}: slope {slope}");
    }
}

#[test]
fn radius_of_unperturbed_table_is_infinite() {
    let t = LindstedtTable::<f64>::unperturbed(&golden(), 1, 10);
    let r = t.radius_estimate();
    assert!(r.infinite);
    assert!(r.rho.is_infinite());
    assert_eq!(r.skipped.len(), 10);
}

#[test]
fn golden_radius_stabilizes() {
    let t = compute_coefficients(&golden(), 1, 20).unwrap();
    let r = t.radius_estimate();
    assert_eq!(r.rows.len(), 20);
    assert!(r.tail_spread(5) < 0.1, "spread {}", r.tail_spread(5));
    assert!(r.rho > 0.0 && r.rho.is_finite());
}

#[test]
fn toy_schedule_has_smaller_radius() {
    let g = compute_coefficients(&golden(), 1, 20).unwrap().radius_estimate();
    let (_, w) = toy_omega();
    let b = compute_coefficients(&w, 1, 20).unwrap().radius_estimate();
    assert!(b.rho < g.rho, "{} vs {}", b.rho, g.rho);
}

#[test]
fn circle_is_invariant_within_residual() {
    let t = compute_coefficients(&golden(), 1, 20).unwrap();
    let rho = t.radius_estimate().rho;
    let rep = circle_invariance(&t, rho / 2.0, &theta_grid(64)).unwrap();
    assert!(rep.max_error < 10.0 * rep.series_residual, "{rep:?}");
}

#[test]
fn bound_reports() {
    let gs = Schedule::golden(60);
    let rep = bound_report(&compute_coefficients(&golden(), 1, 15).unwrap(), &gs, 0).unwrap();
    assert!(rep.pass && rep.fitted_constant.is_finite() && rep.rate_gap > 0.0);
    let one = bound_report(&compute_coefficients(&golden(), 1, 1).unwrap(), &gs, 0).unwrap();
    assert!(one.pass);
    let (s, w) = toy_omega();
    let q1 = s.q_u64(1).unwrap();
    let toy = bound_report(&compute_coefficients(&w, q1, 10).unwrap(), &s, 1).unwrap();
    let br = brjuno_sum(&s, 1.0, 1, None, BrjunoVariant::Standard).unwrap();
    assert_eq!(toy.brjuno_sum, br.sum.hi);
    assert!(toy.pass);
}

#[test]
fn exports() {
    let t = compute_coefficients(&golden(), 1, 3).unwrap();
    let j = t.to_json();
    let c = t.coeff_c64(1, 1);
    assert_eq!(j["1,1"], serde_json::json!([c.re, c.im]));
    assert!(j.get("1,0").is_none() && j.get("2,1").is_none());
    let dir = std::env::temp_dir().join(format!("kamlab-lind-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    write_radius_csv(&dir.join("r.csv"), &t.radius_estimate()).unwrap();
    let text = std::fs::read_to_string(dir.join("r.csv")).unwrap();
    assert!(text.starts_with("k,sup,r_k\n1,"));
    assert_eq!(text.lines().count(), 4);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn table_symmetries(q in 1u64..4, k_max in 1usize..9, bits in 64u32..200) {
        let t = compute_coefficients(&RotationValue::golden(bits), q, k_max).unwrap();
        for k in 1..=k_max {
            let scale = (-(k_max as i64)..=k_max as i64).map(|j| t.coeff_c64(k, j).norm()).fold(0.0, f64::max);
            prop_assert_eq!(t.coeff_c64(k, 0), Complex64::new(0.0, 0.0));
            for j in -(k_max as i64)..=k_max as i64 {
                let c = t.coeff_c64(k, j);
                prop_assert!((c + t.coeff_c64(k, -j)).norm() <= 1e-13 * scale);
                prop_assert!(c.re.abs() <= 1e-13 * scale);
                if j.unsigned_abs() as usize > k || (j - k as i64) % 2 != 0 {
                    prop_assert_eq!(c, Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}
