//! Tree expansion of the Lindstedt coefficients.
//!
//! Trees carry signs `sigma_u` (mode `nu_u = sigma_u q_m`), line momenta in
//! units of `q_m` and, once assigned, a scale per line. Line `u` is the line
//! exiting node `u`; node 0 is the last node and its line the root line.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::cf::{kappa, ln_big, Dist, RotationValue, Schedule, ScanReport, ScanWitness};
use crate::lindstedt::LindstedtTable;
use crate::{Decision, Error, Result};

/// Largest order the enumerator accepts.
pub const MAX_ORDER: usize = 9;

fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn flat_d1(t: f64) -> f64 {
    if t > 0.0 {
        flat(t) / (t * t)
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `x <= 1`, 0 on `x >= 2`, `f(2-x) / (f(2-x) + f(x-1))` between, `f(t) = e^{-1/t}`.
pub fn chi(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let a = flat(2.0 - x);
        let b = flat(x - 1.0);
        a / (a + b)
    }
}

/// `chi'(x)`.
pub fn chi_d1(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        return 0.0;
    }
    let a = flat(2.0 - x);
    let b = flat(x - 1.0);
    -(flat_d1(2.0 - x) * b + a * flat_d1(x - 1.0)) / ((a + b) * (a + b))
}

/// Scales `n` with `chi_n(||omega nu||) != 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScaleSet {
    pub scales: Vec<usize>,
    /// Some support comparison could not be decided at the working precision.
    pub undecidable: bool,
}

/// Multiscale partition of unity attached to a schedule and a level `m`.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub schedule: Schedule,
    pub omega: RotationValue,
    pub m: usize,
}

impl Cutoff {
    pub fn new(schedule: Schedule, omega: RotationValue, m: usize) -> Self {
        Cutoff { schedule, omega, m }
    }

    /// Cutoff with `omega` enclosed from the schedule itself.
    pub fn from_schedule(schedule: Schedule, m: usize, bits: u32) -> Result<Self> {
        let omega = RotationValue::from_schedule(&schedule, bits)?;
        Ok(Cutoff { schedule, omega, m })
    }

    /// `q_{n+m}`.
    pub fn q(&self, n: usize) -> Result<&BigInt> {
        self.schedule.q(n + self.m)
    }

    /// `q_m` as a machine integer.
    pub fn qm(&self) -> Result<u64> {
        self.schedule.q_u64(self.m)
    }

    /// `c q_{n+m} x` in binary64.
    fn scaled(&self, c: f64, n: usize, x: f64) -> Result<f64> {
        let q = self.q(n)?;
        Ok(if q.bits() < 1000 { c * q.to_f64().unwrap() * x } else { (c.ln() + ln_big(q) + x.ln()).exp() })
    }

    /// `chi_0 = 1 - chi(96 q_{m+1} x)`, `chi_n = chi(96 q_{n+m} x) - chi(96 q_{n+m+1} x)`.
    pub fn chi_n(&self, n: usize, x: f64) -> Result<f64> {
        let hi = chi(self.scaled(96.0, n + 1, x)?);
        Ok(if n == 0 { 1.0 - hi } else { chi(self.scaled(96.0, n, x)?) - hi })
    }

    /// `d chi_n / dx`.
    pub fn chi_n_d1(&self, n: usize, x: f64) -> Result<f64> {
        let c1 = self.scaled(96.0, n + 1, 1.0)?;
        let hi = c1 * chi_d1(c1 * x);
        Ok(if n == 0 {
            -hi
        } else {
            let c0 = self.scaled(96.0, n, 1.0)?;
            c0 * chi_d1(c0 * x) - hi
        })
    }

    /// Admissible scales of a nearest-integer distance, decided in exact arithmetic.
    pub fn admissible_dist(&self, d: &Dist) -> Result<ScaleSet> {
        let one = BigInt::from(1);
        let mut out = ScaleSet { scales: Vec::new(), undecidable: false };
        for n in 0.. {
            let upper = if n == 0 { Decision::True } else { d.lt_ratio(&one, &(self.q(n)? * 48)) };
            if upper == Decision::False {
                break;
            }
            let lower = d.gt_ratio(&one, &(self.q(n + 1)? * 96));
            match (lower, upper) {
                (Decision::True, Decision::True) => out.scales.push(n),
                (Decision::False, _) => {}
                _ => {
                    out.scales.push(n);
                    out.undecidable = true;
                }
            }
        }
        Ok(out)
    }

    pub fn admissible(&self, nu: i64) -> Result<ScaleSet> {
        if nu == 0 {
            return Err(Error::SingularDivisor(0));
        }
        self.admissible_dist(&self.omega.dist(nu))
    }

    /// `g_n(nu) = chi_n(||omega nu||) / gamma(nu)`.
    pub fn propagator(&self, nu: i64, n: usize) -> Result<f64> {
        let g = self.omega.gamma(nu)?.mid();
        let x = self.omega.dist(nu).mid();
        Ok(self.chi_n(n, x)? / g)
    }
}

/// Nested tree description `{sign, children}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nested {
    pub sign: i8,
    #[serde(default)]
    pub children: Vec<Nested>,
}

impl Nested {
    pub fn leaf(sign: i8) -> Self {
        Nested { sign, children: Vec::new() }
    }

    pub fn node(sign: i8, children: Vec<Nested>) -> Self {
        Nested { sign, children }
    }
}

/// A sign-labelled rooted tree with root node 0; trees built from [`Nested`] are in preorder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub sign: Vec<i8>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Line momenta in units of `q_m`.
    pub momentum: Vec<i64>,
    /// Node count of the subtree rooted at each node.
    pub size: Vec<usize>,
    /// Number of planar trees in the sibling-permutation class.
    pub multiplicity: u64,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

impl Tree {
    pub fn from_nested(t: &Nested) -> Result<Self> {
        let mut tr = Tree { sign: Vec::new(), parent: Vec::new(), children: Vec::new(), momentum: Vec::new(), size: Vec::new(), multiplicity: 1 };
        fn walk(tr: &mut Tree, t: &Nested, parent: Option<usize>) -> Result<usize> {
            if t.sign != 1 && t.sign != -1 {
                return Err(Error::InvalidArgument(format!("node sign {} must be +1 or -1", t.sign)));
            }
            let u = tr.sign.len();
            tr.sign.push(t.sign);
            tr.parent.push(parent);
            tr.children.push(Vec::new());
            tr.momentum.push(0);
            tr.size.push(0);
            let mut mom = t.sign as i64;
            let mut size = 1;
            for c in &t.children {
                let v = walk(tr, c, Some(u))?;
                tr.children[u].push(v);
                mom += tr.momentum[v];
                size += tr.size[v];
            }
            tr.momentum[u] = mom;
            tr.size[u] = size;
            Ok(u)
        }
        walk(&mut tr, t, None)?;
        tr.multiplicity = tr.compute_multiplicity();
        Ok(tr)
    }

    /// Tree from signs and parent pointers; node 0 must be the unique root.
    pub fn from_parents(sign: Vec<i8>, parent: Vec<Option<usize>>) -> Result<Self> {
        let k = sign.len();
        if k == 0 || parent.len() != k || parent[0].is_some() || parent[1..].iter().any(|p| p.is_none_or(|p| p >= k)) {
            return Err(Error::InvalidArgument("parent pointers must form a tree rooted at node 0".into()));
        }
        if sign.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidArgument("node signs must be +1 or -1".into()));
        }
        let mut children = vec![Vec::new(); k];
        for (u, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(u);
            }
        }
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            order.extend(children[order[i]].iter().copied());
            i += 1;
        }
        if order.len() != k {
            return Err(Error::InvalidArgument("parent pointers contain a cycle".into()));
        }
        let mut momentum: Vec<i64> = sign.iter().map(|s| *s as i64).collect();
        let mut size = vec![1usize; k];
        for u in order.iter().rev() {
            if let Some(p) = parent[*u] {
                momentum[p] += momentum[*u];
                size[p] += size[*u];
            }
        }
        let mut t = Tree { sign, parent, children, momentum, size, multiplicity: 1 };
        t.multiplicity = t.compute_multiplicity();
        Ok(t)
    }

    pub fn to_nested(&self) -> Nested {
        self.nested_at(0)
    }

    fn nested_at(&self, u: usize) -> Nested {
        Nested { sign: self.sign[u], children: self.children[u].iter().map(|c| self.nested_at(*c)).collect() }
    }

    pub fn order(&self) -> usize {
        self.sign.len()
    }

    /// Root momentum in units of `q_m`.
    pub fn total(&self) -> i64 {
        self.momentum[0]
    }

    pub fn has_zero_line(&self) -> bool {
        self.momentum.contains(&0)
    }

    /// Canonical string of the subtree at `u`, invariant under sibling permutations.
    pub fn canonical_at(&self, u: usize) -> String {
        let mut cs: Vec<String> = self.children[u].iter().map(|c| self.canonical_at(*c)).collect();
        cs.sort();
        format!("{}({})", if self.sign[u] > 0 { '+' } else { '-' }, cs.join(","))
    }

    pub fn canonical(&self) -> String {
        self.canonical_at(0)
    }

    fn compute_multiplicity(&self) -> u64 {
        let mut mult = 1u64;
        for u in 0..self.order() {
            let mut groups: BTreeMap<String, usize> = BTreeMap::new();
            for c in &self.children[u] {
                *groups.entry(self.canonical_at(*c)).or_default() += 1;
            }
            mult *= factorial(self.children[u].len()) / groups.values().map(|c| factorial(*c)).product::<u64>();
        }
        mult
    }

    /// All signs reversed.
    pub fn flipped(&self) -> Tree {
        let mut t = self.clone();
        for s in t.sign.iter_mut() {
            *s = -*s;
        }
        for p in t.momentum.iter_mut() {
            *p = -*p;
        }
        t
    }

    /// `true` if `v` lies in the subtree of `u` (including `v = u`).
    pub fn precedes(&self, v: usize, u: usize) -> bool {
        let mut w = Some(v);
        while let Some(x) = w {
            if x == u {
                return true;
            }
            w = self.parent[x];
        }
        false
    }

    /// Nested form plus preorder momenta (in units of `q`) and optional scales.
    pub fn to_json(&self, q: u64, scales: Option<&[usize]>) -> serde_json::Value {
        let mut v = serde_json::json!({
            "tree": self.to_nested(),
            "momenta": self.momentum.iter().map(|p| p * q as i64).collect::<Vec<_>>(),
            "multiplicity": self.multiplicity,
        });
        if let Some(s) = scales {
            v["scales"] = serde_json::json!(s);
        }
        v
    }
}

struct Shape {
    sign: i8,
    children: Vec<usize>,
    sum: i64,
}

/// Canonical sign-labelled trees without zero-momentum lines, up to a maximal order.
pub struct Catalog {
    shapes: Vec<Shape>,
    /// Id range `[start, end)` of the shapes of each size.
    ranges: Vec<(usize, usize)>,
}

impl Catalog {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max > MAX_ORDER {
            return Err(Error::InvalidArgument(format!("order {k_max} exceeds the enumeration budget {MAX_ORDER}")));
        }
        let mut c = Catalog { shapes: Vec::new(), ranges: vec![(0, 0)] };
        for n in 1..=k_max {
            let start = c.shapes.len();
            let mut sets = Vec::new();
            c.multisets(n - 1, start, &mut Vec::new(), &mut sets);
            for sign in [1i8, -1] {
                for ch in &sets {
                    let sum = sign as i64 + ch.iter().map(|i| c.shapes[*i].sum).sum::<i64>();
                    if sum != 0 {
                        c.shapes.push(Shape { sign, children: ch.clone(), sum });
                    }
                }
            }
            c.ranges.push((start, c.shapes.len()));
        }
        Ok(c)
    }

    /// Non-increasing id sequences of total size `rem`, ids below `bound`.
    fn multisets(&self, rem: usize, bound: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for s in (1..=rem.min(self.ranges.len() - 1)).rev() {
            let (a, b) = self.ranges[s];
            for id in (a..b.min(bound)).rev() {
                cur.push(id);
                self.multisets(rem - s, id + 1, cur, out);
                cur.pop();
            }
        }
    }

    pub fn k_max(&self) -> usize {
        self.ranges.len() - 1
    }

    fn nested(&self, id: usize) -> Nested {
        let s = &self.shapes[id];
        Nested { sign: s.sign, children: s.children.iter().map(|c| self.nested(*c)).collect() }
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::InvalidArgument(format!("order {k} outside the catalog range 1..={}", self.k_max())));
        }
        Ok(())
    }

    /// Trees of order `k` and root momentum `j` (units of `q_m`).
    pub fn trees(&self, k: usize, j: i64) -> Result<Vec<Tree>> {
        self.check_order(k)?;
        let (a, b) = self.ranges[k];
        (a..b).filter(|id| self.shapes[*id].sum == j).map(|id| Tree::from_nested(&self.nested(id))).collect()
    }

    /// All trees of order `k`.
    pub fn all_trees(&self, k: usize) -> Result<Vec<Tree>> {
        self.check_order(k)?;
        let (a, b) = self.ranges[k];
        (a..b).map(|id| Tree::from_nested(&self.nested(id))).collect()
    }

    pub fn count(&self, k: usize, j: i64) -> usize {
        if k == 0 || k > self.k_max() {
            return 0;
        }
        let (a, b) = self.ranges[k];
        (a..b).filter(|id| self.shapes[*id].sum == j).count()
    }
}

/// Trees of order `k` with root momentum `nu`, a multiple of `q_m`.
pub fn enumerate_trees(k: usize, nu: i64, qm: u64) -> Result<Vec<Tree>> {
    if qm == 0 || nu % qm as i64 != 0 {
        return Err(Error::InvalidArgument(format!("mode {nu} is not a multiple of q_m = {qm}")));
    }
    Catalog::new(k)?.trees(k, nu / qm as i64)
}

/// Admissible scales of every line.
pub fn line_scales(tree: &Tree, cutoff: &Cutoff, qm: u64) -> Result<Vec<ScaleSet>> {
    tree.momentum.iter().map(|p| cutoff.admissible(p * qm as i64)).collect()
}

/// Run `f` on every admissible scale assignment; returns the number of assignments.
pub fn for_each_assignment(tree: &Tree, cutoff: &Cutoff, qm: u64, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<u64> {
    let sets = line_scales(tree, cutoff, qm)?;
    if sets.iter().any(|s| s.scales.is_empty()) {
        return Ok(0);
    }
    let mut idx = vec![0usize; sets.len()];
    let mut cur: Vec<usize> = sets.iter().map(|s| s.scales[0]).collect();
    let mut count = 0;
    loop {
        f(&cur)?;
        count += 1;
        let mut i = 0;
        loop {
            if i == idx.len() {
                return Ok(count);
            }
            idx[i] += 1;
            if idx[i] < sets[i].scales.len() {
                cur[i] = sets[i].scales[idx[i]];
                break;
            }
            idx[i] = 0;
            cur[i] = sets[i].scales[0];
            i += 1;
        }
    }
}

/// Product of the node factors `sigma_u^{m_u+1} q_m^{m_u} / m_u!` times `(2 pi)^{k-1}`.
pub fn node_factor(tree: &Tree, qm: u64) -> f64 {
    let mut f = (2.0 * PI).powi(tree.order() as i32 - 1);
    for u in 0..tree.order() {
        let m = tree.children[u].len();
        let s = if (m + 1).is_multiple_of(2) { 1.0 } else { tree.sign[u] as f64 };
        f *= s * (qm as f64).powi(m as i32) / factorial(m) as f64;
    }
    f
}

/// `Val = -i (2 pi)^{k-1} prod_u sigma_u^{m_u+1} q_m^{m_u} / m_u! prod_l g_{n_l}(nu_l)`.
pub fn tree_value(tree: &Tree, scales: &[usize], cutoff: &Cutoff, qm: u64) -> Result<Complex64> {
    if scales.len() != tree.order() {
        return Err(Error::InvalidArgument("one scale per line is required".into()));
    }
    let mut r = node_factor(tree, qm);
    for (u, n) in scales.iter().enumerate() {
        r *= cutoff.propagator(tree.momentum[u] * qm as i64, *n)?;
    }
    Ok(Complex64::new(0.0, -r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumCheck {
    pub k: usize,
    pub nu: i64,
    pub tree_sum: Complex64,
    pub coefficient: Complex64,
    pub rel_err: f64,
    pub trees: usize,
    pub assignments: u64,
}

/// `2^-k sum_trees multiplicity sum_scales Val` against the recurrence coefficient.
pub fn sum_check(catalog: &Catalog, cutoff: &Cutoff, qm: u64, k: usize, nu: i64, table: &LindstedtTable<f64>) -> Result<SumCheck> {
    if nu % qm as i64 != 0 {
        return Err(Error::InvalidArgument(format!("mode {nu} is not a multiple of q_m = {qm}")));
    }
    let trees = catalog.trees(k, nu / qm as i64)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut assignments = 0;
    for t in &trees {
        let mult = t.multiplicity as f64;
        assignments += for_each_assignment(t, cutoff, qm, |s| {
            sum += tree_value(t, s, cutoff, qm)? * mult;
            Ok(())
        })?;
    }
    let lhs = sum / 2f64.powi(k as i32);
    let rhs = table.coeff_c64(k, nu / qm as i64);
    let rel = if rhs.norm() == 0.0 { lhs.norm() } else { (lhs - rhs).norm() / rhs.norm() };
    Ok(SumCheck { k, nu, tree_sum: lhs, coefficient: rhs, rel_err: rel, trees: trees.len(), assignments })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub scale: usize,
    /// Internal lines, by the index of the node they exit.
    pub lines: Vec<usize>,
    pub nodes: Vec<usize>,
    pub entering: Vec<usize>,
    pub exiting: Option<usize>,
    /// `sum_{u in T} sigma_u`.
    pub nu: i64,
}

impl Cluster {
    pub fn k(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    /// `N_n`: lines on each scale.
    pub lines_on_scale: BTreeMap<usize, usize>,
}

fn find(p: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while p[r] != r {
        r = p[r];
    }
    let mut y = x;
    while p[y] != r {
        let n = p[y];
        p[y] = r;
        y = n;
    }
    r
}

/// Clusters of every scale present in the assignment.
pub fn find_clusters(tree: &Tree, scales: &[usize]) -> ClusterReport {
    let k = tree.order();
    let mut lines_on_scale = BTreeMap::new();
    for s in scales {
        *lines_on_scale.entry(*s).or_insert(0) += 1;
    }
    let mut clusters = Vec::new();
    for &n in lines_on_scale.keys() {
        // Vertex k stands for the root r.
        let mut p: Vec<usize> = (0..=k).collect();
        for u in 0..k {
            if scales[u] <= n {
                let a = find(&mut p, u);
                let b = find(&mut p, tree.parent[u].unwrap_or(k));
                p[a] = b;
            }
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for u in 0..k {
            if scales[u] <= n {
                let r = find(&mut p, u);
                comps.entry(r).or_default().push(u);
            }
        }
        for lines in comps.into_values() {
            if !lines.iter().any(|u| scales[*u] == n) {
                continue;
            }
            let mut nodes: Vec<usize> = lines.iter().flat_map(|u| [Some(*u), tree.parent[*u]]).flatten().collect();
            nodes.sort_unstable();
            nodes.dedup();
            let entering: Vec<usize> = (0..k).filter(|w| !lines.contains(w) && tree.parent[*w].map(|p| nodes.contains(&p)).unwrap_or(false)).collect();
            let exiting = nodes.iter().copied().find(|u| !lines.contains(u));
            let nu = nodes.iter().map(|u| tree.sign[*u] as i64).sum();
            clusters.push(Cluster { scale: n, lines, nodes, entering, exiting, nu });
        }
    }
    ClusterReport { clusters, lines_on_scale }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Resonance {
    /// Index into [`ClusterReport::clusters`].
    pub cluster: usize,
    /// `n_V`.
    pub scale: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// `n_V^R = min(n^i, n^o)`.
    pub n_r: usize,
    pub l: usize,
    pub k: usize,
}

fn entering_orders(tree: &Tree, c: &Cluster) -> Vec<usize> {
    c.entering.iter().map(|w| tree.size[*w]).collect()
}

/// Resonances among the clusters, with `n = n_V^R` in the order conditions.
pub fn detect_resonances(tree: &Tree, scales: &[usize], rep: &ClusterReport, s: &Schedule, m: usize) -> Result<Vec<Resonance>> {
    let qm = s.q(m)?.clone();
    let mut out = Vec::new();
    for (ci, c) in rep.clusters.iter().enumerate() {
        if c.nu != 0 {
            continue;
        }
        let Some(exit) = c.exiting else { continue };
        let l = c.entering.len();
        if l == 0 {
            continue;
        }
        let ins: Vec<usize> = c.entering.iter().map(|w| scales[*w]).collect();
        let n_in = *ins.iter().min().unwrap();
        let n_out = scales[exit];
        if ins.iter().filter(|x| **x == n_in).count() < l - 1 {
            continue;
        }
        if l >= 2 && n_in > n_out {
            continue;
        }
        if l == 1 && n_in.abs_diff(n_out) > 1 {
            continue;
        }
        let n = n_in.min(n_out);
        let k = c.k();
        if BigInt::from(k) >= kappa(s, n, m)? {
            continue;
        }
        let q1 = s.q(n + m + 1)?;
        let q0 = s.q(n + m)?;
        if *q1 <= q0 * &qm * 4 {
            if l != 1 {
                continue;
            }
        } else if l >= 2 {
            let orders = entering_orders(tree, c);
            let big = |o: usize| BigInt::from(o) * &qm * 4 >= *q1;
            let nbig = orders.iter().filter(|o| big(**o)).count();
            let k0: usize = orders.iter().filter(|o| !big(**o)).sum();
            let ok = (nbig == 1 && BigInt::from(k0) * &qm * 8 < *q1) || (nbig == 0 && BigInt::from(k0 + k) * &qm * 4 < *q1);
            if !ok {
                continue;
            }
        }
        out.push(Resonance { cluster: ci, scale: c.scale, n_in, n_out, n_r: n, l, k });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingRow {
    pub n: usize,
    pub lines: usize,
    pub resonances_on_scale: usize,
    pub resonance_scale: usize,
    /// `M_n = N_n + P_n`.
    pub m_n: usize,
    /// `2 q_m k / q_{n+m} + N_n^R`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingReport {
    pub rows: Vec<CountingRow>,
    pub pass: bool,
}

/// Check `M_n <= 2 q_m k / q_{n+m} + N_n^R` at every scale, in exact integers.
pub fn counting_check(tree: &Tree, rep: &ClusterReport, res: &[Resonance], s: &Schedule, m: usize) -> Result<CountingReport> {
    let qm = s.q(m)?.clone();
    let k = tree.order();
    let top = rep.lines_on_scale.keys().copied().chain(res.iter().map(|r| r.n_r)).max().unwrap_or(0);
    let mut rows = Vec::new();
    for n in 0..=top {
        let lines = rep.lines_on_scale.get(&n).copied().unwrap_or(0);
        let p = res.iter().filter(|r| r.scale == n).count();
        let nr = res.iter().filter(|r| r.n_r == n).count();
        let qn = s.q(n + m)?;
        let lhs = BigInt::from(lines + p) - BigInt::from(nr);
        let pass = lhs * qn <= BigInt::from(2 * k) * &qm;
        let bound = 2.0 * k as f64 * (ln_big(&qm) - ln_big(qn)).exp() + nr as f64;
        rows.push(CountingRow { n, lines, resonances_on_scale: p, resonance_scale: nr, m_n: lines + p, bound, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(CountingReport { rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueBound {
    pub ln_value: f64,
    /// `ln[(2 q_m)^k prod_n (768 q_{n+m+1})^{2 N_n}]`.
    pub ln_bound: f64,
    pub pass: bool,
}

/// The trivial bound on a tree value with constant 1.
pub fn value_bound_check(tree: &Tree, value: Complex64, rep: &ClusterReport, s: &Schedule, m: usize) -> Result<ValueBound> {
    let qm = s.q(m)?;
    let mut ln_bound = tree.order() as f64 * (2f64.ln() + ln_big(qm));
    for (n, c) in &rep.lines_on_scale {
        ln_bound += 2.0 * *c as f64 * (768f64.ln() + ln_big(s.q(n + m + 1)?));
    }
    let ln_value = value.norm().ln();
    Ok(ValueBound { ln_value, ln_bound, pass: ln_value <= ln_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: String,
    pub tree: serde_json::Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TreeScan {
    pub k_max: usize,
    pub trees: u64,
    pub assignments: u64,
    pub clusters: u64,
    pub resonances: u64,
    /// Largest `|Val| / bound` over the scan.
    pub fitted_constant: f64,
    /// Largest number of (tree, assignment) pairs at fixed `(k, nu)` divided by `16^k`.
    pub max_count_ratio: f64,
    pub undecidable_lines: u64,
    pub violations: Vec<Violation>,
}

impl TreeScan {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Exhaustive scan of all trees up to `k_max` and all admissible scale
/// assignments: Siegel-Brjuno counting, the trivial value bound, the
/// `k < kappa(n)` vanishing and `n_V^R >= n_V + 1`.
pub fn exhaustive_scan(catalog: &Catalog, cutoff: &Cutoff, k_max: usize) -> Result<TreeScan> {
    let qm = cutoff.qm()?;
    let s = &cutoff.schedule;
    let m = cutoff.m;
    let mut out = TreeScan { k_max, ..Default::default() };
    const MAX_RECORDED: usize = 50;
    for k in 1..=k_max {
        let mut per_nu: BTreeMap<i64, u64> = BTreeMap::new();
        for t in catalog.all_trees(k)? {
            out.trees += 1;
            let sets = line_scales(&t, cutoff, qm)?;
            out.undecidable_lines += sets.iter().filter(|x| x.undecidable).count() as u64;
            let record = |kind: &str, t: &Tree, sc: &[usize], out: &mut TreeScan| {
                if out.violations.len() < MAX_RECORDED {
                    out.violations.push(Violation { kind: kind.into(), tree: t.to_json(qm, Some(sc)) });
                }
            };
            let n_assign = for_each_assignment(&t, cutoff, qm, |sc| {
                let rep = find_clusters(&t, sc);
                let res = detect_resonances(&t, sc, &rep, s, m)?;
                out.clusters += rep.clusters.len() as u64;
                out.resonances += res.len() as u64;
                if !counting_check(&t, &rep, &res, s, m)?.pass {
                    record("siegel_brjuno", &t, sc, &mut out);
                }
                let v = tree_value(&t, sc, cutoff, qm)?;
                if v.norm() > 0.0 {
                    let vb = value_bound_check(&t, v, &rep, s, m)?;
                    out.fitted_constant = out.fitted_constant.max((vb.ln_value - vb.ln_bound).exp());
                    if !vb.pass {
                        record("value_bound", &t, sc, &mut out);
                    }
                }
                for r in &res {
                    if r.n_r < r.scale + 1 {
                        record("resonance_scale", &t, sc, &mut out);
                    }
                }
                // k < kappa(n) forces N_n = 0 and P_{n-1} = 0.
                let top = rep.lines_on_scale.keys().max().copied().unwrap_or(0) + 1;
                for n in 1..=top {
                    if BigInt::from(k) < kappa(s, n, m)? {
                        let nn = rep.lines_on_scale.get(&n).copied().unwrap_or(0);
                        let p = res.iter().filter(|r| r.scale == n - 1).count();
                        if nn != 0 || p != 0 {
                            record("order_below_kappa", &t, sc, &mut out);
                        }
                    }
                }
                Ok(())
            })?;
            out.assignments += n_assign;
            *per_nu.entry(t.total()).or_default() += n_assign;
        }
        for c in per_nu.values() {
            out.max_count_ratio = out.max_count_ratio.max(*c as f64 / 16f64.powi(k as i32));
        }
    }
    Ok(out)
}

/// For `||omega nu||` in `[1/(768 q_{n+m+1}), 1/(8 q_{n+m})]`, every admissible
/// scale `n'` satisfies `n - 8 <= n' <= n + 8`.
pub fn scale_range_scan(cutoff: &Cutoff, n_max: usize, vmax: i64) -> Result<ScanReport> {
    let one = BigInt::from(1);
    let mut rep = ScanReport::default();
    let bounds: Vec<(BigInt, BigInt)> = (0..=n_max).map(|n| Ok((cutoff.q(n + 1)? * 768, cutoff.q(n)? * 8))).collect::<Result<_>>()?;
    for v in 1..=vmax {
        let d = cutoff.omega.dist(v);
        let mut adm: Option<ScaleSet> = None;
        for (n, (lo, hi)) in bounds.iter().enumerate() {
            rep.checked += 1;
            let above = match d.lt_ratio(&one, lo) {
                Decision::True => Decision::False,
                Decision::False => Decision::True,
                Decision::Undecidable => Decision::Undecidable,
            };
            let below = d.le_ratio(&one, hi);
            match (above, below) {
                (Decision::True, Decision::True) => {
                    rep.triggered += 1;
                    if adm.is_none() {
                        adm = Some(cutoff.admissible_dist(&d)?);
                    }
                    let a = adm.as_ref().unwrap();
                    if a.undecidable {
                        rep.undecidable.push(ScanWitness { v, n, dist: d.interval() });
                    }
                    if a.scales.iter().any(|np| np + 8 < n || *np > n + 8) {
                        rep.counterexamples.push(ScanWitness { v, n, dist: d.interval() });
                    }
                }
                (Decision::False, _) | (_, Decision::False) => {}
                _ => rep.undecidable.push(ScanWitness { v, n, dist: d.interval() }),
            }
        }
    }
    Ok(rep)
}

/// `[0; 3, 100, 1, 1, ...]`: the modes `+-3` sit on scale 1 for `m = 0`, so
/// small trees carry resonances.
pub fn resonant_fixture_schedule(levels: usize) -> Result<Schedule> {
    let mut a = vec![BigInt::from(0), BigInt::from(3), BigInt::from(100)];
    a.extend(std::iter::repeat_n(BigInt::from(1), levels.saturating_sub(2)));
    Schedule::explicit(&a)
}
