use std::collections::BTreeSet;

use kamlab_core::cf::{omega_bar_up_to, RotationValue, Schedule, DEFAULT_DIGIT_BUDGET};
use kamlab_core::lindstedt::compute_coefficients;
use kamlab_core::trees::*;
use num_bigint::BigInt;
use proptest::prelude::*;

fn golden_cutoff(m: usize) -> Cutoff {
    Cutoff::new(Schedule::golden(80), RotationValue::golden(256), m)
}

fn fixture_cutoff() -> Cutoff {
    Cutoff::from_schedule(resonant_fixture_schedule(60).unwrap(), 0, 256).unwrap()
}

fn toy_cutoff() -> Cutoff {
    Cutoff::from_schedule(omega_bar_up_to(1.0, 0.5, 8, DEFAULT_DIGIT_BUDGET).unwrap(), 0, 256).unwrap()
}

fn chain(signs: &[i8]) -> Nested {
    let mut t = Nested::leaf(*signs.last().unwrap());
    for s in signs.iter().rev().skip(1) {
        t = Nested::node(*s, vec![t]);
    }
    t
}

/// Planar (ordered) sign-labelled trees of a given size.
fn planar(n: usize) -> Vec<Nested> {
    fn forests(n: usize) -> Vec<Vec<Nested>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 1..=n {
            for head in planar(first) {
                for mut tail in forests(n - first) {
                    tail.insert(0, head.clone());
                    out.push(tail);
                }
            }
        }
        out
    }
    let mut out = Vec::new();
    for sign in [1, -1] {
        for f in forests(n - 1) {
            out.push(Nested::node(sign, f));
        }
    }
    out
}

#[test]
fn order_one_has_two_trees() {
    let c = Catalog::new(1).unwrap();
    let t = c.all_trees(1).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(enumerate_trees(1, 1, 1).unwrap().len(), 1);
    assert_eq!(enumerate_trees(1, -2, 2).unwrap().len(), 1);
}

#[test]
fn order_two_only_same_sign_chains() {
    let t = enumerate_trees(2, 2, 1).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].sign, vec![1, 1]);
    assert!(enumerate_trees(2, 0, 1).unwrap().is_empty());
}

#[test]
fn enumeration_errors() {
    assert!(enumerate_trees(MAX_ORDER + 1, 1, 1).is_err());
    assert!(enumerate_trees(3, 3, 2).is_err());
}

#[test]
fn catalog_matches_planar_oracle() {
    let cat = Catalog::new(6).unwrap();
    let unsigned_shapes = [1, 1, 2, 4, 9, 20];
    for k in 1..=6 {
        let planar_trees: Vec<Tree> = planar(k).iter().map(|n| Tree::from_nested(n).unwrap()).filter(|t| !t.has_zero_line()).collect();
        let classes: BTreeSet<String> = planar_trees.iter().map(|t| t.canonical()).collect();
        let trees = cat.all_trees(k).unwrap();
        assert_eq!(trees.len(), classes.len(), "k={k}");
        let ours: BTreeSet<String> = trees.iter().map(|t| t.canonical()).collect();
        assert_eq!(ours, classes);
        let total: u64 = trees.iter().map(|t| t.multiplicity).sum();
        assert_eq!(total as usize, planar_trees.len());
        assert!(trees.iter().all(|t| !t.has_zero_line()));

        let all_shapes: BTreeSet<String> = planar(k).iter().map(|n| Tree::from_nested(&unsign(n)).unwrap().canonical()).collect();
        assert_eq!(all_shapes.len(), unsigned_shapes[k - 1]);
    }
}

fn unsign(n: &Nested) -> Nested {
    Nested::node(1, n.children.iter().map(unsign).collect())
}

#[test]
fn telescoping_partition() {
    for (cut, top) in [(golden_cutoff(0), 20), (golden_cutoff(2), 15), (fixture_cutoff(), 6)] {
        for i in 1..2000 {
            let x = 0.5 * (i as f64 / 2000.0).powi(6);
            let mut s = 0.0;
            for n in 0..=top {
                s += cut.chi_n(n, x).unwrap();
            }
            let q = cut.q(top + 1).unwrap();
            let last = chi(96.0 * num_traits::ToPrimitive::to_f64(q).unwrap() * x);
            assert!((s + last - 1.0).abs() < 1e-14, "x={x}");
        }
    }
}

#[test]
fn support_and_overlap_on_golden_has_at_most_three_scales() {
    let cut = golden_cutoff(0);
    let mut max_scales = 0;
    for v in 1..=10_000i64 {
        let a = cut.admissible(v).unwrap();
        assert!(!a.undecidable);
        max_scales = max_scales.max(a.scales.len());
        let x = cut.omega.dist(v).mid();
        for n in &a.scales {
            let c = cut.chi_n(*n, x).unwrap();
            let q1 = num_traits::ToPrimitive::to_f64(cut.q(n + 1).unwrap()).unwrap();
            let q0 = num_traits::ToPrimitive::to_f64(cut.q(*n).unwrap()).unwrap();
            assert!(x >= 1.0 / (96.0 * q1));
            if *n >= 1 {
                assert!(x <= 1.0 / (48.0 * q0));
            }
            // chi(1 + t) = 1 - O(e^{-1/t}) rounds to 1 next to the plateau edges.
            let edge = (96.0 * q1 * x - 1.0).min(1.0 - 48.0 * q0 * x);
            assert!(c >= 0.0);
            assert!(c > 0.0 || edge < 0.03, "v={v} n={n}");
        }
        for n in 0..12usize {
            if !a.scales.contains(&n) {
                assert_eq!(cut.chi_n(n, x).unwrap(), 0.0, "v={v} n={n}");
            }
        }
    }
    // Adjacent supports overlap threefold wherever q_{n+2} < 2 q_{n+1}, which holds at every golden level.
    assert_eq!(max_scales, 3);
}

#[test]
fn large_distance_only_scale_zero() {
    let cut = golden_cutoff(0);
    for v in [1, 2, 4, 7] {
        assert_eq!(cut.admissible(v).unwrap().scales, vec![0]);
    }
}

#[test]
fn convergent_denominators_land_near_their_level() {
    let cut = golden_cutoff(0);
    // ||omega q_n|| = 1/(sqrt5 q_{n+1}) + o(1/q_n) straddles chi_{n-8} and chi_{n-7}.
    for n in 8..40 {
        let q = num_traits::ToPrimitive::to_i64(cut.q(n).unwrap()).unwrap();
        assert_eq!(cut.admissible(q).unwrap().scales, vec![n - 8, n - 7], "q_{n}");
    }
}

#[test]
fn plateau_interior_has_one_scale() {
    let cut = golden_cutoff(0);
    let q5 = num_traits::ToPrimitive::to_f64(cut.q(5).unwrap()).unwrap();
    let q6 = num_traits::ToPrimitive::to_f64(cut.q(6).unwrap()).unwrap();
    // On chi_5's plateau: 2/(96 q_5) <= x <= 1/(96 q_6).
    for v in 1..=20_000i64 {
        let x = cut.omega.dist(v).mid();
        if x > 2.0 / (96.0 * q5) * 1.01 && x < 1.0 / (96.0 * q6) * 0.99 {
            assert_eq!(cut.admissible(v).unwrap().scales, vec![5]);
        }
    }
}

#[test]
fn sum_rule_against_recurrence() {
    let cat = Catalog::new(5).unwrap();
    let omega = RotationValue::golden(256);
    for m in [0usize, 2, 3] {
        let cut = golden_cutoff(m);
        let qm = cut.qm().unwrap();
        let table = compute_coefficients(&omega, qm, 5).unwrap();
        for k in 1..=5usize {
            for j in (-(k as i64)..=k as i64).filter(|j| (k as i64 - j) % 2 == 0 && *j != 0) {
                let s = sum_check(&cat, &cut, qm, k, j * qm as i64, &table).unwrap();
                assert!(s.rel_err < 1e-9, "qm={qm} k={k} j={j}: {:?} vs {:?}", s.tree_sum, s.coefficient);
            }
        }
    }
}

#[test]
fn sum_rule_first_order_is_exact() {
    let cat = Catalog::new(1).unwrap();
    let cut = golden_cutoff(0);
    let table = compute_coefficients(&cut.omega, 1, 1).unwrap();
    let s = sum_check(&cat, &cut, 1, 1, 1, &table).unwrap();
    assert_eq!(s.trees, 1);
    assert!(s.rel_err <= 4.0 * f64::EPSILON, "{}", s.rel_err);
}

#[test]
fn sum_rule_maximal_mode_uses_all_plus_trees() {
    let cat = Catalog::new(4).unwrap();
    let cut = golden_cutoff(2);
    let table = compute_coefficients(&cut.omega, 2, 4).unwrap();
    let s = sum_check(&cat, &cut, 2, 4, 8, &table).unwrap();
    assert_eq!(s.trees, 4);
    for t in cat.trees(4, 4).unwrap() {
        assert!(t.sign.iter().all(|s| *s == 1));
    }
    assert!(s.rel_err < 1e-9);
}

#[test]
fn sum_rule_on_fixture_with_multiscale_lines() {
    let cat = Catalog::new(6).unwrap();
    let cut = fixture_cutoff();
    let table = compute_coefficients(&cut.omega, 1, 6).unwrap();
    let mut multi = 0;
    for k in 1..=6usize {
        for j in (-(k as i64)..=k as i64).filter(|j| (k as i64 - j) % 2 == 0 && *j != 0) {
            let s = sum_check(&cat, &cut, 1, k, j, &table).unwrap();
            if s.assignments > s.trees as u64 {
                multi += 1;
            }
            assert!(s.rel_err < 1e-9, "k={k} j={j}");
        }
    }
    assert!(multi > 0);
}

#[test]
fn vanishing_cutoff_gives_zero_value() {
    let cut = golden_cutoff(0);
    let t = Tree::from_nested(&chain(&[1, 1])).unwrap();
    assert_eq!(tree_value(&t, &[3, 0], &cut, 1).unwrap().norm(), 0.0);
}

#[test]
fn sign_flip_conjugates() {
    let cat = Catalog::new(5).unwrap();
    let cut = fixture_cutoff();
    for k in 1..=5 {
        for t in cat.all_trees(k).unwrap() {
            let f = t.flipped();
            for_each_assignment(&t, &cut, 1, |s| {
                let a = tree_value(&t, s, &cut, 1)?;
                let b = tree_value(&f, s, &cut, 1)?;
                assert!((b - a.conj()).norm() <= 1e-14 * a.norm());
                assert!((b + a).norm() <= 1e-14 * a.norm());
                Ok(())
            })
            .unwrap();
        }
    }
}

#[test]
fn first_order_tree_has_trivial_clusters() {
    let cut = golden_cutoff(0);
    for sign in [1, -1] {
        let t = Tree::from_nested(&Nested::leaf(sign)).unwrap();
        let rep = find_clusters(&t, &[0]);
        assert_eq!(rep.clusters.len(), 1);
        assert_eq!(rep.clusters[0].exiting, None);
        let res = detect_resonances(&t, &[0], &rep, &cut.schedule, 0).unwrap();
        assert!(res.is_empty());
        let c = counting_check(&t, &rep, &res, &cut.schedule, 0).unwrap();
        assert!(c.pass);
        assert!(c.rows[0].m_n <= 1 && c.rows[0].bound >= 1.0);
        let v = tree_value(&t, &[0], &cut, 1).unwrap();
        assert!(value_bound_check(&t, v, &rep, &cut.schedule, 0).unwrap().pass);
    }
}

/// `r(+) <- a(+) <- b(-) <- c(+) <- d(+) <- e(+)`: the pair `{a, b}` carries
/// zero mode sum and is linked by the scale-0 line of momentum 2; the lines
/// entering and exiting it carry momentum 3, which sits on scale 1.
#[test]
fn hand_built_resonance() {
    let cut = fixture_cutoff();
    let t = Tree::from_nested(&chain(&[1, 1, -1, 1, 1, 1])).unwrap();
    assert_eq!(t.momentum, vec![4, 3, 2, 3, 2, 1]);
    let sets = line_scales(&t, &cut, 1).unwrap();
    assert_eq!(sets[1].scales, vec![1]);
    assert_eq!(sets[2].scales, vec![0]);
    assert_eq!(sets[3].scales, vec![1]);
    let scales: Vec<usize> = sets.iter().map(|s| s.scales[0]).collect();
    let rep = find_clusters(&t, &scales);
    let res = detect_resonances(&t, &scales, &rep, &cut.schedule, 0).unwrap();
    let v: Vec<&Resonance> = res.iter().filter(|r| rep.clusters[r.cluster].nodes == vec![1, 2]).collect();
    assert_eq!(v.len(), 1);
    let r = v[0];
    let c = &rep.clusters[r.cluster];
    assert_eq!(c.lines, vec![2]);
    assert_eq!(c.entering, vec![3]);
    assert_eq!(c.exiting, Some(1));
    assert_eq!((r.scale, r.n_in, r.n_out, r.n_r, r.l, r.k), (0, 1, 1, 1, 1, 2));
    // kappa(1) = q_1 / q_0 = 3 exceeds k = 2; q_2 = 301 > 4 q_1 q_0 = 12.
    assert_eq!(cut.q(2).unwrap(), &BigInt::from(301));
    assert!(r.n_r > r.scale);
    assert!(counting_check(&t, &rep, &res, &cut.schedule, 0).unwrap().pass);

    // With a shorter entering chain every line near the pair is on scale 0.
    let t2 = Tree::from_nested(&chain(&[1, 1, -1, 1, 1])).unwrap();
    let s2: Vec<usize> = line_scales(&t2, &cut, 1).unwrap().iter().map(|s| s.scales[0]).collect();
    assert_eq!(s2, vec![1, 0, 0, 0, 0]);
    let rep2 = find_clusters(&t2, &s2);
    assert!(detect_resonances(&t2, &s2, &rep2, &cut.schedule, 0).unwrap().is_empty());
}

#[test]
fn siegel_brjuno_exhaustive_on_golden() {
    let cat = Catalog::new(8).unwrap();
    let r = exhaustive_scan(&cat, &golden_cutoff(0), 8).unwrap();
    assert!(r.pass(), "{:?}", r.violations);
    assert_eq!(r.undecidable_lines, 0);
    assert!(r.max_count_ratio <= 1.0);
}

#[test]
fn siegel_brjuno_exhaustive_on_resonant_fixture() {
    let cat = Catalog::new(8).unwrap();
    let r = exhaustive_scan(&cat, &fixture_cutoff(), 8).unwrap();
    assert!(r.resonances > 0);
    assert!(r.assignments > r.trees);
    assert!(r.pass(), "{:?}", r.violations);
    assert_eq!(r.count("resonance_scale"), 0);
    assert_eq!(r.count("order_below_kappa"), 0);
}

#[test]
fn siegel_brjuno_exhaustive_on_toy() {
    let cat = Catalog::new(8).unwrap();
    let r = exhaustive_scan(&cat, &toy_cutoff(), 8).unwrap();
    assert!(r.pass(), "{:?}", r.violations);
}

#[test]
fn scale_range_on_golden() {
    let r = scale_range_scan(&golden_cutoff(0), 4, 10_000).unwrap();
    assert!(r.triggered > 0);
    assert!(r.counterexamples.is_empty());
    assert!(r.undecidable.is_empty());
}

#[test]
fn deep_scale_value_bound() {
    let s = Schedule::explicit(&[0, 3, 1_000_000, 1, 1, 1, 1].map(BigInt::from)).unwrap();
    let cut = Cutoff::from_schedule(s, 0, 256).unwrap();
    let t = Tree::from_nested(&chain(&[1, 1, 1])).unwrap();
    let sets = line_scales(&t, &cut, 1).unwrap();
    assert_eq!(sets[0].scales, vec![1]);
    let scales: Vec<usize> = sets.iter().map(|s| s.scales[0]).collect();
    let v = tree_value(&t, &scales, &cut, 1).unwrap();
    assert!(v.norm() > 1e10);
    let rep = find_clusters(&t, &scales);
    let b = value_bound_check(&t, v, &rep, &cut.schedule, 0).unwrap();
    assert!(b.pass && b.ln_bound > 30.0);
}

#[test]
fn json_round_trip() {
    let n = Nested::node(1, vec![Nested::leaf(-1), Nested::node(1, vec![Nested::leaf(1)])]);
    let t = Tree::from_nested(&n).unwrap();
    let j = t.to_json(2, Some(&[0, 0, 0, 0]));
    assert_eq!(j["momenta"], serde_json::json!([4, -2, 4, 2]));
    let back: Nested = serde_json::from_value(j["tree"].clone()).unwrap();
    assert_eq!(back, n);
    let leaf: Nested = serde_json::from_str(r#"{"sign": -1}"#).unwrap();
    assert_eq!(leaf, Nested::leaf(-1));
    assert!(Tree::from_nested(&Nested::leaf(2)).is_err());
}

fn nested_strategy() -> impl Strategy<Value = Nested> {
    let leaf = prop_oneof![Just(1i8), Just(-1i8)].prop_map(Nested::leaf);
    leaf.prop_recursive(4, 9, 3, |inner| (prop_oneof![Just(1i8), Just(-1i8)], prop::collection::vec(inner, 0..3)).prop_map(|(s, c)| Nested::node(s, c)))
}

fn reverse_children(n: &Nested) -> Nested {
    Nested::node(n.sign, n.children.iter().rev().map(reverse_children).collect())
}

proptest! {
    #[test]
    fn momentum_is_subtree_sum(n in nested_strategy()) {
        let t = Tree::from_nested(&n).unwrap();
        for u in 0..t.order() {
            let s: i64 = (0..t.order()).filter(|v| t.precedes(*v, u)).map(|v| t.sign[v] as i64).sum();
            prop_assert_eq!(t.momentum[u], s);
            prop_assert_eq!(t.size[u], (0..t.order()).filter(|v| t.precedes(*v, u)).count());
        }
    }

    #[test]
    fn canonical_form_ignores_sibling_order(n in nested_strategy()) {
        let a = Tree::from_nested(&n).unwrap();
        let b = Tree::from_nested(&reverse_children(&n)).unwrap();
        prop_assert_eq!(a.canonical(), b.canonical());
        prop_assert_eq!(a.multiplicity, b.multiplicity);
    }
}
