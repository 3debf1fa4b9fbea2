//! Resonance generations, resonance families and the cancellation of
//! localized resonance factors.
//!
//! A family keeps node indices fixed: members differ from the base tree only
//! in where entering lines are attached and in the signs of the resonance
//! nodes. Line scales are inherited, indexed by the node a line exits.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::trees::{detect_resonances, find_clusters, for_each_assignment, line_scales, tree_value, Catalog, ClusterReport, Cutoff, Resonance, Tree};
use crate::{Error, Result};

pub const FAMILY_MAX_K: usize = 4;
pub const FAMILY_MAX_L: usize = 2;
/// Relative tolerance on family sums of localized factors.
pub const CANCELLATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResonanceRecord {
    pub nodes: Vec<usize>,
    /// Internal lines, by the node they exit.
    pub lines: Vec<usize>,
    pub entering: Vec<usize>,
    pub exiting: Option<usize>,
    pub scale: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub n_r: usize,
    pub k: usize,
    /// Type `z_V`: 2 minus the number of derived lines inherited from the containing resonance.
    pub z: u8,
    pub derived: [usize; 2],
}

fn first_two(lines: &[usize]) -> [usize; 2] {
    [lines[0], *lines.get(1).unwrap_or(&lines[0])]
}

impl ResonanceRecord {
    pub fn from_resonance(rep: &ClusterReport, r: &Resonance) -> Self {
        let c = &rep.clusters[r.cluster];
        ResonanceRecord {
            nodes: c.nodes.clone(),
            lines: c.lines.clone(),
            entering: c.entering.clone(),
            exiting: c.exiting,
            scale: r.scale,
            n_in: r.n_in,
            n_out: r.n_out,
            n_r: r.n_r,
            k: r.k,
            z: 2,
            derived: first_two(&c.lines),
        }
    }

    /// Record for a connected node set given by hand; no resonance conditions are checked.
    pub fn from_nodes(tree: &Tree, scales: &[usize], nodes: &[usize]) -> Result<Self> {
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let inside = |u: &usize| nodes.binary_search(u).is_ok();
        let lines: Vec<usize> = nodes.iter().copied().filter(|u| tree.parent[*u].is_some_and(|p| inside(&p))).collect();
        let tops: Vec<usize> = nodes.iter().copied().filter(|u| !tree.parent[*u].is_some_and(|p| inside(&p))).collect();
        if nodes.len() < 2 || tops.len() != 1 || tops[0] >= tree.order() {
            return Err(Error::InvalidArgument("resonance nodes must form a connected set of at least two nodes".into()));
        }
        let entering: Vec<usize> = (0..tree.order()).filter(|w| !inside(w) && tree.parent[*w].is_some_and(|p| inside(&p))).collect();
        let scale = lines.iter().map(|u| scales[*u]).max().unwrap();
        let n_in = entering.iter().map(|w| scales[*w]).min().unwrap_or(scale + 1);
        let n_out = scales[tops[0]];
        Ok(ResonanceRecord { k: nodes.len(), derived: first_two(&lines), nodes, lines, entering, exiting: Some(tops[0]), scale, n_in, n_out, n_r: n_in.min(n_out), z: 2 })
    }

    pub fn l(&self) -> usize {
        self.entering.len()
    }

    pub fn strictly_contains(&self, other: &Self) -> bool {
        self.nodes.len() > other.nodes.len() && other.nodes.iter().all(|u| self.nodes.binary_search(u).is_ok())
    }
}

/// Generation of each record: 1 plus the number of records strictly containing it.
pub fn generation_of(records: &[ResonanceRecord]) -> Vec<usize> {
    records.iter().map(|r| 1 + records.iter().filter(|o| o.strictly_contains(r)).count()).collect()
}

/// Indices of the records of generations `1..=G`.
pub fn generations(records: &[ResonanceRecord]) -> Vec<Vec<usize>> {
    let g = generation_of(records);
    let top = g.iter().copied().max().unwrap_or(0);
    (1..=top).map(|j| (0..records.len()).filter(|i| g[*i] == j).collect()).collect()
}

/// Derived lines and types, propagated from the outermost resonances inwards.
/// Free derived slots take the smallest internal lines not already chosen.
pub fn assign_types(records: &mut [ResonanceRecord]) {
    let g = generation_of(records);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|i| g[*i]);
    for i in order {
        let parent = (0..records.len()).filter(|j| records[*j].strictly_contains(&records[i])).min_by_key(|j| records[*j].nodes.len());
        let Some(p) = parent else {
            records[i].z = 2;
            records[i].derived = first_two(&records[i].lines);
            continue;
        };
        let inherited: Vec<usize> = records[p].derived.iter().copied().filter(|l| records[i].lines.contains(l)).collect();
        let r = &mut records[i];
        r.z = 2 - inherited.len() as u8;
        let mut d = inherited.clone();
        for l in &r.lines {
            if d.len() == 2 {
                break;
            }
            if !d.contains(l) {
                d.push(*l);
            }
        }
        while d.len() < 2 {
            d.push(d[0]);
        }
        r.derived = [d[0], d[1]];
    }
}

/// Among the lines entering `inner`, at most one also enters `outer`.
pub fn derived_lines_nested(outer: &ResonanceRecord, inner: &ResonanceRecord) -> bool {
    inner.entering.iter().filter(|w| outer.entering.contains(w)).count() <= 1
}

fn divisor(x: f64) -> f64 {
    let s = (PI * x).sin();
    -4.0 * s * s
}

/// `G_n(x) = chi_n(|x|) / (2 (cos 2 pi x - 1))` for `x` in `(-1/2, 1/2]`.
pub fn g(cutoff: &Cutoff, n: usize, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::SingularLocalization);
    }
    Ok(cutoff.chi_n(n, x.abs())? / divisor(x))
}

/// `G_n'(x)`.
pub fn g_d1(cutoff: &Cutoff, n: usize, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::SingularLocalization);
    }
    let d = divisor(x);
    let dd = -4.0 * PI * (2.0 * PI * x).sin();
    Ok(x.signum() * cutoff.chi_n_d1(n, x.abs())? / d - cutoff.chi_n(n, x.abs())? * dd / (d * d))
}

/// Central difference of `G_n` with step `h`.
pub fn g_d1_fd(cutoff: &Cutoff, n: usize, x: f64, h: f64) -> Result<f64> {
    Ok((g(cutoff, n, x + h)? - g(cutoff, n, x - h)?) / (2.0 * h))
}

/// Central differences at steps `h` and `h/2`, `h = 1e-6 |x|`, and their Richardson extrapolation.
pub fn g_d1_richardson(cutoff: &Cutoff, n: usize, x: f64) -> Result<(f64, f64, f64)> {
    let h = 1e-6 * x.abs();
    let a = g_d1_fd(cutoff, n, x, h)?;
    let b = g_d1_fd(cutoff, n, x, h / 2.0)?;
    Ok((a, b, (4.0 * b - a) / 3.0))
}

/// Localized resonance factor with its pieces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Localized {
    pub value: f64,
    /// `V_V` at zero entering frequencies.
    pub order0: f64,
    /// `sum_l mu_l d V_V / d mu_l` at zero.
    pub order1: f64,
    /// `U_V`.
    pub node_factor: f64,
    /// Product of the internal propagators at zero entering frequencies.
    pub propagators: f64,
}

struct Internal {
    x0: Vec<f64>,
    mu: Vec<f64>,
    node_factor: f64,
}

fn internal(tree: &Tree, rec: &ResonanceRecord, cutoff: &Cutoff, qm: u64) -> Result<Internal> {
    let mut x0 = Vec::with_capacity(rec.lines.len());
    for u in &rec.lines {
        let nu0: i64 = rec.nodes.iter().filter(|w| tree.precedes(**w, *u)).map(|w| tree.sign[*w] as i64).sum();
        if nu0 == 0 {
            return Err(Error::SingularLocalization);
        }
        x0.push(cutoff.omega.frac_signed(nu0 * qm as i64));
    }
    let mu = rec.entering.iter().map(|w| cutoff.omega.frac_signed(tree.momentum[*w] * qm as i64)).collect();
    let mut node_factor = 1.0;
    for u in &rec.nodes {
        let m = tree.children[*u].len();
        let s = if (m + 1).is_multiple_of(2) { 1.0 } else { tree.sign[*u] as f64 };
        node_factor *= s * (qm as f64).powi(m as i32) / (1..=m).map(|i| i as f64).product::<f64>();
    }
    Ok(Internal { x0, mu, node_factor })
}

/// Indices into `rec.lines` of the lines below which entering line `l` flows.
fn flow(tree: &Tree, rec: &ResonanceRecord, l: usize) -> Vec<usize> {
    let a = tree.parent[rec.entering[l]].unwrap();
    (0..rec.lines.len()).filter(|i| tree.precedes(a, rec.lines[*i])).collect()
}

/// `V_V(mu)`: node factor times internal propagators with entering frequencies `mu` added
/// along their flow; the derived line inherited by a type-1 resonance carries `G'`.
pub fn resonance_factor(tree: &Tree, scales: &[usize], rec: &ResonanceRecord, cutoff: &Cutoff, qm: u64, mu: &[f64]) -> Result<f64> {
    let int = internal(tree, rec, cutoff, qm)?;
    let mut x = int.x0.clone();
    for (l, m) in mu.iter().enumerate() {
        for i in flow(tree, rec, l) {
            x[i] += m;
        }
    }
    let mut v = int.node_factor;
    for (i, u) in rec.lines.iter().enumerate() {
        v *= if rec.z == 1 && *u == rec.derived[0] { g_d1(cutoff, scales[*u], x[i])? } else { g(cutoff, scales[*u], x[i])? };
    }
    Ok(v)
}

/// `L V_V`: zero for `z = 0`, the value at zero entering frequencies for `z = 1`,
/// and the first-order Taylor polynomial for `z = 2`.
pub fn localized_factor(tree: &Tree, scales: &[usize], rec: &ResonanceRecord, cutoff: &Cutoff, qm: u64) -> Result<Localized> {
    let int = internal(tree, rec, cutoff, qm)?;
    let shared = |u: usize| rec.z == 1 && u == rec.derived[0];
    let mut gs = Vec::with_capacity(rec.lines.len());
    let mut ds = Vec::with_capacity(rec.lines.len());
    for (i, u) in rec.lines.iter().enumerate() {
        let n = scales[*u];
        gs.push(if shared(*u) { g_d1(cutoff, n, int.x0[i])? } else { g(cutoff, n, int.x0[i])? });
        ds.push(g_d1(cutoff, n, int.x0[i])?);
    }
    let propagators: f64 = gs.iter().product();
    let order0 = int.node_factor * propagators;
    let mut order1 = 0.0;
    if rec.z == 2 {
        for (l, mu) in int.mu.iter().enumerate() {
            let mut d = 0.0;
            for i in flow(tree, rec, l) {
                let others: f64 = gs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g).product();
                d += ds[i] * others;
            }
            order1 += mu * int.node_factor * d;
        }
    }
    let value = match rec.z {
        0 => 0.0,
        1 => order0,
        _ => order0 + order1,
    };
    Ok(Localized { value, order0, order1, node_factor: int.node_factor, propagators })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyMember {
    #[serde(skip)]
    pub tree: Tree,
    /// Attachment node of each entering line.
    pub attach: Vec<usize>,
    pub inverted: bool,
    /// Planar trees represented: `prod_{u in V} m_u! / s_u!`.
    pub planar_weight: u64,
    /// `prod_{u in V} binomial(m_u, s_u)`.
    pub binomial_weight: u64,
    pub localized: Localized,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceFamily {
    pub record: ResonanceRecord,
    pub members: Vec<FamilyMember>,
    pub reattachment_choices: u64,
    pub binomial_size: u64,
    pub planar_size: u64,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Attachment targets of each entering line: the nodes of the minimal resonance
/// containing its endpoint, minus those of resonances nested inside it.
fn targets(tree: &Tree, rec: &ResonanceRecord, all: &[ResonanceRecord]) -> Vec<Vec<usize>> {
    let subs: Vec<&ResonanceRecord> = all.iter().filter(|o| rec.strictly_contains(o)).collect();
    let free = |host: &ResonanceRecord| -> Vec<usize> {
        host.nodes.iter().copied().filter(|u| !all.iter().any(|o| host.strictly_contains(o) && o.nodes.contains(u))).collect()
    };
    rec.entering
        .iter()
        .map(|w| {
            let a = tree.parent[*w].unwrap();
            match subs.iter().filter(|s| s.nodes.contains(&a)).min_by_key(|s| s.nodes.len()) {
                Some(s) => free(s),
                None => free(rec),
            }
        })
        .collect()
}

/// All members generated by reattachments, entering-line permutations and mode inversion.
pub fn family(tree: &Tree, scales: &[usize], rec: &ResonanceRecord, all: &[ResonanceRecord], cutoff: &Cutoff, qm: u64) -> Result<ResonanceFamily> {
    if rec.k > FAMILY_MAX_K || rec.l() > FAMILY_MAX_L {
        return Err(Error::FamilyBudget { k: rec.k, l: rec.l() });
    }
    let tg = targets(tree, rec, all);
    let choices: u64 = tg.iter().map(|t| t.len() as u64).product();
    let mut members = Vec::new();
    let mut idx = vec![0usize; tg.len()];
    loop {
        let attach: Vec<usize> = idx.iter().zip(&tg).map(|(i, t)| t[*i]).collect();
        for inverted in [false, true] {
            let mut parent = tree.parent.clone();
            for (w, a) in rec.entering.iter().zip(&attach) {
                parent[*w] = Some(*a);
            }
            let mut sign = tree.sign.clone();
            if inverted {
                for u in &rec.nodes {
                    sign[*u] = -sign[*u];
                }
            }
            let t = Tree::from_parents(sign, parent)?;
            let (mut planar, mut binom) = (1u64, 1u64);
            for u in &rec.nodes {
                let m = t.children[*u].len();
                let s = t.children[*u].iter().filter(|c| rec.nodes.contains(c)).count();
                planar *= factorial(m) / factorial(s);
                binom *= factorial(m) / (factorial(s) * factorial(m - s));
            }
            let localized = localized_factor(&t, scales, rec, cutoff, qm)?;
            let value = if t.has_zero_line() { Complex64::new(0.0, 0.0) } else { tree_value(&t, scales, cutoff, qm)? };
            members.push(FamilyMember { tree: t, attach: attach.clone(), inverted, planar_weight: planar, binomial_weight: binom, localized, value });
        }
        let mut i = 0;
        loop {
            if i == idx.len() {
                let binomial_size = members.iter().map(|m| m.binomial_weight).sum();
                let planar_size = members.iter().map(|m| m.planar_weight).sum();
                return Ok(ResonanceFamily { record: rec.clone(), members, reattachment_choices: choices, binomial_size, planar_size });
            }
            idx[i] += 1;
            if idx[i] < tg[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Canonical string of a tree with its line scales.
pub fn canonical_scaled(tree: &Tree, scales: &[usize]) -> String {
    fn at(t: &Tree, s: &[usize], u: usize) -> String {
        let mut cs: Vec<String> = t.children[u].iter().map(|c| at(t, s, *c)).collect();
        cs.sort();
        format!("{}{}({})", if t.sign[u] > 0 { '+' } else { '-' }, s[u], cs.join(","))
    }
    at(tree, scales, 0)
}

impl ResonanceFamily {
    pub fn keys(&self, scales: &[usize]) -> BTreeSet<String> {
        self.members.iter().map(|m| canonical_scaled(&m.tree, scales)).collect()
    }

    pub fn to_json(&self, qm: u64, scales: &[usize]) -> serde_json::Value {
        serde_json::json!({
            "record": self.record,
            "reattachment_choices": self.reattachment_choices,
            "binomial_size": self.binomial_size,
            "planar_size": self.planar_size,
            "members": self.members.iter().map(|m| serde_json::json!({
                "tree": m.tree.to_json(qm, Some(scales)),
                "attach": m.attach,
                "inverted": m.inverted,
                "planar_weight": m.planar_weight,
                "localized": m.localized.value,
                "value": [m.value.re, m.value.im],
            })).collect::<Vec<_>>(),
        })
    }
}

/// Regenerating the family from each member with nonvanishing value yields the same member set.
pub fn closure_holds(fam: &ResonanceFamily, scales: &[usize], all: &[ResonanceRecord], cutoff: &Cutoff, qm: u64) -> Result<bool> {
    let keys = fam.keys(scales);
    for m in fam.members.iter().filter(|m| m.value.norm() > 0.0) {
        if family(&m.tree, scales, &fam.record, all, cutoff, qm)?.keys(scales) != keys {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancellationReport {
    pub z: u8,
    pub k: usize,
    pub l: usize,
    pub members: usize,
    pub family_sum: f64,
    pub abs_sum: f64,
    pub relative: f64,
    pub pass: bool,
}

/// `|sum_F w L V_V| <= 1e-9 sum_F |w L V_V|`, with `w` the planar weight.
pub fn cancellation_check(fam: &ResonanceFamily) -> CancellationReport {
    let terms: Vec<f64> = fam.members.iter().map(|m| m.planar_weight as f64 * m.localized.value).collect();
    let family_sum: f64 = terms.iter().sum();
    let abs_sum: f64 = terms.iter().map(|t| t.abs()).sum();
    let relative = if abs_sum == 0.0 { 0.0 } else { family_sum.abs() / abs_sum };
    let pass = if abs_sum == 0.0 { family_sum == 0.0 } else { relative < CANCELLATION_TOL };
    CancellationReport { z: fam.record.z, k: fam.record.k, l: fam.record.l(), members: fam.members.len(), family_sum, abs_sum, relative, pass }
}

pub fn write_cancellation_csv(path: &Path, rows: &[CancellationReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "z", "k", "l", "members", "family_sum", "abs_sum", "relative", "pass"])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([i.to_string(), r.z.to_string(), r.k.to_string(), r.l.to_string(), r.members.to_string(), r.family_sum.to_string(), r.abs_sum.to_string(), r.relative.to_string(), r.pass.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Resonance records of a scale assignment, with types assigned.
pub fn records(tree: &Tree, scales: &[usize], cutoff: &Cutoff) -> Result<Vec<ResonanceRecord>> {
    let rep = find_clusters(tree, scales);
    let res = detect_resonances(tree, scales, &rep, &cutoff.schedule, cutoff.m)?;
    let mut recs: Vec<ResonanceRecord> = res.iter().map(|r| ResonanceRecord::from_resonance(&rep, r)).collect();
    assign_types(&mut recs);
    Ok(recs)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RenormScan {
    pub k_max: usize,
    pub trees: u64,
    pub assignments: u64,
    pub resonances: u64,
    pub first_generation: u64,
    pub checked: u64,
    pub over_budget: u64,
    pub singular: u64,
    pub max_relative: f64,
    pub reports: Vec<CancellationReport>,
    pub failures: Vec<serde_json::Value>,
}

impl RenormScan {
    pub fn pass(&self) -> bool {
        self.failures.is_empty() && self.singular == 0
    }
}

/// Cancellation on every first-generation resonance within budget, over all
/// trees up to `k_max` and all admissible scale assignments.
pub fn cancellation_scan(catalog: &Catalog, cutoff: &Cutoff, k_max: usize) -> Result<RenormScan> {
    let qm = cutoff.qm()?;
    let mut out = RenormScan { k_max, ..Default::default() };
    for k in 1..=k_max {
        for t in catalog.all_trees(k)? {
            out.trees += 1;
            out.assignments += for_each_assignment(&t, cutoff, qm, |sc| {
                let recs = records(&t, sc, cutoff)?;
                out.resonances += recs.len() as u64;
                let gens = generation_of(&recs);
                for (r, g) in recs.iter().zip(&gens) {
                    if *g != 1 {
                        continue;
                    }
                    out.first_generation += 1;
                    let fam = match family(&t, sc, r, &recs, cutoff, qm) {
                        Ok(f) => f,
                        Err(Error::FamilyBudget { .. }) => {
                            out.over_budget += 1;
                            continue;
                        }
                        Err(Error::SingularLocalization) => {
                            out.singular += 1;
                            out.failures.push(serde_json::json!({"kind": "singular", "tree": t.to_json(qm, Some(sc)), "record": r}));
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let rep = cancellation_check(&fam);
                    out.checked += 1;
                    out.max_relative = out.max_relative.max(rep.relative);
                    if !rep.pass {
                        out.failures.push(fam.to_json(qm, sc));
                    }
                    out.reports.push(rep);
                }
                Ok(())
            })?;
        }
    }
    Ok(out)
}

fn base_scales(t: &Tree, cutoff: &Cutoff) -> Result<Vec<usize>> {
    Ok(line_scales(t, cutoff, 1)?.iter().map(|s| s.scales[0]).collect())
}

/// Hand-built families on a resonant schedule with `q_m = 1`: an adjacent
/// pair, a four-node block with two entering lines, and a nested pair.
pub fn fixture_families(cutoff: &Cutoff) -> Result<Vec<(String, ResonanceFamily)>> {
    let mut out = Vec::new();
    let pair = Tree::from_parents(vec![1, 1, -1, 1, 1, 1], (0..6).map(|i: usize| i.checked_sub(1)).collect())?;
    let s = base_scales(&pair, cutoff)?;
    let rec = ResonanceRecord::from_nodes(&pair, &s, &[1, 2])?;
    out.push(("pair".to_string(), family(&pair, &s, &rec, std::slice::from_ref(&rec), cutoff, 1)?));

    let block = Tree::from_parents(vec![1, -1, -1, 1, 1, 1, 1, 1], vec![None, Some(0), Some(1), Some(2), Some(3), Some(2), Some(4), Some(6)])?;
    let mut s = base_scales(&block, cutoff)?;
    for (u, nu0) in [(2, 1), (3, 2), (4, 1)] {
        s[u] = cutoff.admissible(nu0)?.scales[0];
    }
    let rec = ResonanceRecord::from_nodes(&block, &s, &[1, 2, 3, 4])?;
    out.push(("four_node_block".to_string(), family(&block, &s, &rec, std::slice::from_ref(&rec), cutoff, 1)?));

    let nested = Tree::from_parents(vec![1, 1, 1, -1, -1, 1, 1, 1], vec![None, Some(0), Some(1), Some(2), Some(3), Some(4), Some(3), Some(5)])?;
    let s = base_scales(&nested, cutoff)?;
    let mut recs = vec![ResonanceRecord::from_nodes(&nested, &s, &[1, 2, 3, 4])?, ResonanceRecord::from_nodes(&nested, &s, &[2, 3])?];
    assign_types(&mut recs);
    out.push(("nested_outer".to_string(), family(&nested, &s, &recs[0], &recs, cutoff, 1)?));
    out.push(("nested_inner".to_string(), family(&nested, &s, &recs[1], &recs, cutoff, 1)?));
    Ok(out)
}
