//! Aubry-Mather variational tools: minimal periodic and heteroclinic
//! configurations of a generating function and the Peierls barrier.
//!
//! Minimizers are found by preconditioned gradient descent followed by a
//! damped Newton polish on the tridiagonal (or cyclic) Hessian.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::twist::GeneratingFamily;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Gradient-descent stage stops below this residual.
    pub gd_tol: f64,
    /// Newton stage stops below this residual.
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { gd_tol: 1e-6, newton_tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Configuration {
    pub x: Vec<f64>,
    pub action: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Number of order-preserving projections applied.
    pub projections: usize,
    pub converged: bool,
    /// Hessian on the free sites is positive definite.
    pub positive_definite: bool,
    /// Sites held on a support edge of the bump, where the gradient points into the bump.
    pub wall_sites: Vec<usize>,
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Action `sum_i h(x_i, x_{i+1})` of an open chain.
pub fn action(f: &GeneratingFamily, x: &[f64]) -> f64 {
    neumaier(x.windows(2).map(|w| f.h(w[0], w[1])))
}

/// `max_i |d1 h(x_i, x_{i+1}) + d2 h(x_{i-1}, x_i)|` over interior sites, skipping `skip`.
pub fn stationarity_residual(f: &GeneratingFamily, x: &[f64], skip: Option<usize>) -> f64 {
    (1..x.len().saturating_sub(1))
        .filter(|i| Some(*i) != skip)
        .map(|i| (f.d1h(x[i], x[i + 1]) + f.d2h(x[i - 1], x[i])).abs())
        .fold(0.0, f64::max)
}

/// Periodic action `sum_{i<q} h(x_i, x_{i+1})` with `x_{i+q} = x_i + p`.
pub fn periodic_action(f: &GeneratingFamily, x: &[f64], p: i64) -> f64 {
    let q = x.len();
    neumaier((0..q).map(|i| f.h(x[i], if i + 1 < q { x[i + 1] } else { x[0] + p as f64 })))
}

/// A minimization problem on a chain of sites.
trait Chain {
    fn len(&self) -> usize;
    fn free(&self, i: usize) -> bool;
    fn action(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Solve `H s = r` on the free sites; returns the solution and positive-definiteness.
    fn newton_solve(&self, x: &[f64], r: &[f64]) -> Option<(Vec<f64>, bool)>;
    fn precondition(&self, r: &[f64]) -> Vec<f64>;
    fn project(&self, x: &mut [f64]) -> bool;
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Tridiagonal solve with unit off-diagonals `-1`, skipping fixed rows.
fn thomas(diag: &[f64], free: &[bool], r: &[f64]) -> Option<(Vec<f64>, bool)> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pd = true;
    let mut prev_free = false;
    for i in 0..n {
        if !free[i] {
            c[i] = 0.0;
            d[i] = 0.0;
            prev_free = false;
            continue;
        }
        let (a, cp, dp) = if prev_free { (-1.0, c[i - 1], d[i - 1]) } else { (0.0, 0.0, 0.0) };
        let m = diag[i] - a * cp;
        if m <= 0.0 {
            pd = false;
        }
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        let next_free = i + 1 < n && free[i + 1];
        c[i] = if next_free { -1.0 / m } else { 0.0 };
        d[i] = (r[i] - a * dp) / m;
        prev_free = true;
    }
    let mut s = vec![0.0; n];
    for i in (0..n).rev() {
        if !free[i] {
            continue;
        }
        s[i] = d[i] - c[i] * if i + 1 < n && free[i + 1] { s[i + 1] } else { 0.0 };
    }
    Some((s, pd))
}

/// Pool-adjacent-violators projection onto non-decreasing sequences, clipped to `[lo, hi]`.
fn isotonic(v: &mut [f64], lo: f64, hi: f64) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &y in v.iter() {
        blocks.push((y, 1));
        while blocks.len() >= 2 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((m1 * n1 as f64 + m2 * n2 as f64) / (n1 + n2) as f64, n1 + n2);
        }
    }
    let mut i = 0;
    for (m, n) in blocks {
        for _ in 0..n {
            v[i] = m.clamp(lo, hi);
            i += 1;
        }
    }
}

/// Descent steps before switching to Newton regardless of the residual.
const GD_BUDGET: usize = 2_000;

fn run<C: Chain>(c: &C, mut x: Vec<f64>, o: &MinimizeOptions) -> Configuration {
    let mut it = 0;
    let mut projections = 0;
    let mut g = c.gradient(&x);
    let mut r = max_abs(&g);
    let mut a = c.action(&x);
    // Preconditioned descent with Armijo backtracking.
    while r > o.gd_tol && it < o.max_iter.min(GD_BUDGET) {
        it += 1;
        let d: Vec<f64> = c.precondition(&g).iter().map(|v| -v).collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            if c.project(&mut y) {
                projections += 1;
            }
            let ay = c.action(&y);
            if ay <= a + 1e-4 * t * slope || (ay <= a && t < 1e-6) {
                x = y;
                a = ay;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        g = c.gradient(&x);
        r = max_abs(&g);
        if !accepted {
            break;
        }
    }
    // Damped Newton polish.
    let mut pd = false;
    while r > o.newton_tol && it < o.max_iter {
        it += 1;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let (s, spd) = match c.newton_solve(&x, &neg) {
            Some(v) => v,
            None => (c.precondition(&neg), false),
        };
        pd = spd;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let mut y: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi + t * si).collect();
            let proj = c.project(&mut y);
            let gy = c.gradient(&y);
            let ry = max_abs(&gy);
            let ay = c.action(&y);
            if ry < r && ay <= a + 1e-12 * (1.0 + a.abs()) {
                projections += proj as usize;
                x = y;
                g = gy;
                r = ry;
                a = ay;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // Rejected Newton step, e.g. on an indefinite patch: fall back to one descent step.
            let d = c.precondition(&neg);
            let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            for _ in 0..60 {
                let mut y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                let proj = c.project(&mut y);
                let ay = c.action(&y);
                if ay <= a + 1e-4 * t * slope && ay < a {
                    projections += proj as usize;
                    x = y;
                    a = ay;
                    g = c.gradient(&x);
                    r = max_abs(&g);
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !moved {
            break;
        }
    }
    if let Some((_, spd)) = c.newton_solve(&x, &vec![0.0; c.len()]) {
        pd = spd;
    }
    let free_count = (0..c.len()).filter(|i| c.free(*i)).count();
    if free_count == 0 {
        r = 0.0;
        pd = true;
    }
    Configuration { action: a, residual: r, iterations: it, projections, converged: r <= o.newton_tol, positive_definite: pd, x, wall_sites: Vec::new() }
}

struct OpenChain<'a> {
    f: &'a GeneratingFamily,
    free: Vec<bool>,
    bounds: Vec<(usize, usize)>,
    shift: f64,
}

impl<'a> OpenChain<'a> {
    fn new(f: &'a GeneratingFamily, n: usize, pin: Option<usize>) -> Self {
        Self::with_fixed(f, n, pin.as_slice())
    }

    fn with_fixed(f: &'a GeneratingFamily, n: usize, fixed: &[usize]) -> Self {
        let mut free = vec![true; n + 1];
        free[0] = false;
        free[n] = false;
        for &j in fixed {
            free[j] = false;
        }
        let cuts: Vec<usize> = (0..=n).filter(|i| !free[*i]).collect();
        let bounds = cuts.windows(2).map(|w| (w[0], w[1])).collect();
        let c = 4.0 * PI * PI * f.delta;
        OpenChain { f, free, bounds, shift: c.max(1e-3) }
    }
}

impl Chain for OpenChain<'_> {
    fn len(&self) -> usize {
        self.free.len()
    }

    fn free(&self, i: usize) -> bool {
        self.free[i]
    }

    fn action(&self, x: &[f64]) -> f64 {
        action(self.f, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| if self.free[i] { 2.0 * x[i] - x[i - 1] - x[i + 1] + self.f.v1(x[i]) } else { 0.0 })
            .collect()
    }

    fn newton_solve(&self, x: &[f64], r: &[f64]) -> Option<(Vec<f64>, bool)> {
        let diag: Vec<f64> = x.iter().map(|xi| 2.0 + self.f.v2(*xi)).collect();
        thomas(&diag, &self.free, r)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let diag = vec![2.0 + self.shift; r.len()];
        thomas(&diag, &self.free, r).map(|v| v.0).unwrap_or_else(|| r.to_vec())
    }

    fn project(&self, x: &mut [f64]) -> bool {
        let mut changed = false;
        for &(a, b) in &self.bounds {
            let seg = &x[a..=b];
            if seg.windows(2).any(|w| w[0] > w[1]) {
                let (lo, hi) = (x[a], x[b]);
                isotonic(&mut x[a + 1..b], lo, hi);
                changed = true;
            }
        }
        let _ = self.shift;
        changed
    }
}

struct PeriodicChain<'a> {
    f: &'a GeneratingFamily,
    p: i64,
    free: Vec<bool>,
    shift: f64,
}

impl PeriodicChain<'_> {
    fn neighbours(&self, x: &[f64], i: usize) -> (f64, f64) {
        let q = x.len();
        let p = self.p as f64;
        let prev = if i == 0 { x[q - 1] - p } else { x[i - 1] };
        let next = if i + 1 == q { x[0] + p } else { x[i + 1] };
        (prev, next)
    }

    fn dense(&self, diag: &[f64], r: &[f64]) -> Option<(Vec<f64>, bool)> {
        let q = diag.len();
        let idx: Vec<usize> = (0..q).filter(|i| self.free[*i]).collect();
        let m = idx.len();
        if m == 0 {
            return Some((vec![0.0; q], true));
        }
        let mut a = vec![vec![0.0; m + 1]; m];
        for (ri, &i) in idx.iter().enumerate() {
            for (ci, &j) in idx.iter().enumerate() {
                let mut v = if i == j { diag[i] } else { 0.0 };
                if q == 1 {
                    v = diag[i] - 2.0;
                } else {
                    if (i + 1) % q == j {
                        v -= 1.0;
                    }
                    if (j + 1) % q == i {
                        v -= 1.0;
                    }
                }
                a[ri][ci] = v;
            }
            a[ri][m] = r[i];
        }
        // Cholesky attempt for definiteness, then Gaussian elimination for the solve.
        let pd = cholesky_ok(&a, m);
        for col in 0..m {
            let piv = (col..m).max_by(|x, y| a[*x][col].abs().total_cmp(&a[*y][col].abs()))?;
            if a[piv][col] == 0.0 {
                return None;
            }
            a.swap(col, piv);
            for row in col + 1..m {
                let fct = a[row][col] / a[col][col];
                for k in col..=m {
                    a[row][k] -= fct * a[col][k];
                }
            }
        }
        let mut s = vec![0.0; m];
        for row in (0..m).rev() {
            let mut acc = a[row][m];
            for k in row + 1..m {
                acc -= a[row][k] * s[k];
            }
            s[row] = acc / a[row][row];
        }
        let mut out = vec![0.0; q];
        for (ri, &i) in idx.iter().enumerate() {
            out[i] = s[ri];
        }
        Some((out, pd))
    }
}

fn cholesky_ok(a: &[Vec<f64>], m: usize) -> bool {
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

impl Chain for PeriodicChain<'_> {
    fn len(&self) -> usize {
        self.free.len()
    }

    fn free(&self, i: usize) -> bool {
        self.free[i]
    }

    fn action(&self, x: &[f64]) -> f64 {
        periodic_action(self.f, x, self.p)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                if !self.free[i] {
                    return 0.0;
                }
                let (a, b) = self.neighbours(x, i);
                2.0 * x[i] - a - b + self.f.v1(x[i])
            })
            .collect()
    }

    fn newton_solve(&self, x: &[f64], r: &[f64]) -> Option<(Vec<f64>, bool)> {
        let diag: Vec<f64> = x.iter().map(|xi| 2.0 + self.f.v2(*xi)).collect();
        self.dense(&diag, r)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let diag = vec![2.0 + self.shift; r.len()];
        self.dense(&diag, r).map(|v| v.0).unwrap_or_else(|| r.to_vec())
    }

    fn project(&self, x: &mut [f64]) -> bool {
        if self.p <= 0 || x.len() < 2 {
            return false;
        }
        // Cyclic monotonicity: x_0 <= ... <= x_{q-1} <= x_0 + p.
        let ok = x.windows(2).all(|w| w[0] <= w[1]) && x[x.len() - 1] <= x[0] + self.p as f64;
        if ok {
            return false;
        }
        let lo = x[0];
        let hi = x[0] + self.p as f64;
        if self.free[0] {
            isotonic(x, f64::NEG_INFINITY, f64::INFINITY);
        } else {
            isotonic(&mut x[1..], lo, hi);
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicMinimizer {
    pub p: i64,
    pub q: usize,
    pub config: Configuration,
    /// `x_0` was held fixed to remove a flat direction.
    pub pinned_x0: bool,
}

/// Minimal `(p, q)`-periodic configuration, `x_{i+q} = x_i + p`.
pub fn minimize_periodic(f: &GeneratingFamily, p: i64, q: usize, init: Option<Vec<f64>>, o: &MinimizeOptions) -> Result<PeriodicMinimizer> {
    if q == 0 {
        return Err(Error::InvalidArgument("period q must be positive".into()));
    }
    let pin = f.is_integrable();
    let mut best: Option<Configuration> = None;
    let inits: Vec<Vec<f64>> = match init {
        Some(v) => {
            if v.len() != q {
                return Err(Error::InvalidArgument(format!("initial configuration has {} sites, expected {q}", v.len())));
            }
            vec![v]
        }
        None => {
            // Uniform rotations with a few phases.
            (0..8).map(|k| (0..q).map(|i| k as f64 / 8.0 / q as f64 + i as f64 * p as f64 / q as f64).collect()).collect()
        }
    };
    for x0 in inits {
        let mut free = vec![true; q];
        if pin {
            free[0] = false;
        }
        let ch = PeriodicChain { f, p, free, shift: (4.0 * PI * PI * f.delta).max(0.1) };
        let c = run(&ch, x0, o);
        if best.as_ref().map(|b| c.action < b.action - 1e-13).unwrap_or(true) {
            best = Some(c);
        }
    }
    Ok(PeriodicMinimizer { p, q, config: require_converged(best.unwrap(), "periodic minimization")?, pinned_x0: pin })
}

/// Minimal periodic configuration with `x_0 = xi`.
pub fn minimize_periodic_pinned(f: &GeneratingFamily, p: i64, q: usize, xi: f64, o: &MinimizeOptions) -> Result<Configuration> {
    if q == 0 {
        return Err(Error::InvalidArgument("period q must be positive".into()));
    }
    let mut free = vec![true; q];
    free[0] = false;
    let ch = PeriodicChain { f, p, free, shift: (4.0 * PI * PI * f.delta).max(0.1) };
    let x0: Vec<f64> = (0..q).map(|i| xi + i as f64 * p as f64 / q as f64).collect();
    require_converged(run(&ch, x0, o), "pinned periodic minimization")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct HeteroclinicOptions {
    /// Number of steps `N`; the chain has sites `0..=N` with `x_0 = 0`, `x_N = 1`.
    pub n: Option<usize>,
    /// Width `Delta` used for the span requirement; defaults to `sqrt(delta)`.
    pub width: Option<f64>,
    pub minimize: MinimizeOptions,
}


/// Resolve `(N, Delta)`: default `N = ceil(40 / Delta)`, required `N >= 10 / Delta`.
pub fn resolve_span(f: &GeneratingFamily, o: &HeteroclinicOptions) -> Result<(usize, f64)> {
    let w = o.width.unwrap_or_else(|| f.width());
    if !(w > 0.0) {
        return Err(Error::InvalidArgument("heteroclinic span needs a positive width Delta".into()));
    }
    let required = (10.0 / w).ceil() as usize;
    let n = o.n.unwrap_or((40.0 / w).ceil() as usize);
    if n < required {
        return Err(Error::InsufficientSpan { n, required });
    }
    Ok((n, w))
}

/// Discrete rate of the hyperbolic fixed point, `cosh c = 1 + 2 pi^2 delta`.
fn rate(f: &GeneratingFamily) -> f64 {
    (1.0 + 2.0 * PI * PI * f.delta).acosh()
}

fn profile(n: usize, c: f64, center: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..=n)
        .map(|i| if c < 1e-9 { i as f64 / n as f64 } else { 2.0 / PI * (c * (i as f64 - center)).exp().atan() })
        .collect();
    x[0] = 0.0;
    x[n] = 1.0;
    x
}

fn require_converged(c: Configuration, what: &str) -> Result<Configuration> {
    if c.converged {
        Ok(c)
    } else {
        Err(Error::NotConverged(format!("{what}: residual {:e} after {} iterations", c.residual, c.iterations)))
    }
}

fn better(a: &Configuration, b: &Configuration) -> bool {
    match (a.positive_definite, b.positive_definite) {
        (true, false) => a.action <= b.action + 1e-12,
        (false, true) => a.action < b.action - 1e-12,
        _ => a.action < b.action,
    }
}

/// Distance within which a site outside the bump counts as resting on a support edge.
const WALL_TOL: f64 = 1e-6;

/// Support edges of the bump in chain coordinates, with the direction pointing into the support.
fn bump_walls(f: &GeneratingFamily, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let Some(b) = &f.bump else { return Vec::new() };
    let q = f.qcover.max(1) as f64;
    let (a, z) = b.support();
    let mut out = Vec::new();
    let k0 = (lo * q).floor() as i64 - 1;
    let k1 = (hi * q).ceil() as i64 + 1;
    for k in k0..=k1 {
        out.push(((a + k as f64) / q, 1.0));
        out.push(((z + k as f64) / q, -1.0));
    }
    out
}

/// Re-solve with sites that press against a bump edge held on that edge.
///
/// At f64 resolution the bump rises from 0 to order `Delta^2` within one ulp of its edge, so a
/// minimizer touching it is a constrained one: the tangential gradient vanishes on the remaining
/// sites and the held sites carry a nonnegative multiplier.
fn wall_polish(f: &GeneratingFamily, n: usize, pins: &[usize], c: Configuration, o: &MinimizeOptions) -> Configuration {
    if c.converged || f.bump.is_none() {
        return c;
    }
    let walls = bump_walls(f, c.x[0].min(c.x[n]), c.x[0].max(c.x[n]));
    let grad = |x: &[f64], skip: &[usize]| -> Vec<f64> {
        OpenChain::with_fixed(f, n, skip).gradient(x)
    };
    let mut held: Vec<usize> = Vec::new();
    let mut best = c;
    for _ in 0..8 {
        let g = grad(&best.x, pins);
        let mut x = best.x.clone();
        let mut changed = false;
        for i in 1..n {
            if pins.contains(&i) {
                continue;
            }
            let touching = walls.iter().find(|(w, dir)| (x[i] - w).abs() <= WALL_TOL && (x[i] - w) * dir <= 0.0 && -g[i] * dir > 0.0);
            match touching {
                Some((w, _)) if !held.contains(&i) => {
                    x[i] = *w;
                    held.push(i);
                    changed = true;
                }
                None if held.contains(&i) => {
                    held.retain(|h| *h != i);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed && best.converged {
            break;
        }
        if held.is_empty() {
            return best;
        }
        held.sort_unstable();
        let fixed: Vec<usize> = pins.iter().chain(&held).copied().collect();
        let ch = OpenChain::with_fixed(f, n, &fixed);
        let mut r = run(&ch, x, o);
        r.iterations += best.iterations;
        r.projections += best.projections;
        r.wall_sites = held.clone();
        let released = held.iter().any(|i| {
            let gi = grad(&r.x, pins)[*i];
            walls.iter().all(|(w, dir)| (r.x[*i] - w).abs() > WALL_TOL || -gi * dir <= 0.0)
        });
        let done = r.converged && !released;
        best = r;
        if done {
            break;
        }
    }
    best
}

/// Minimal heteroclinic configuration from the fixed point 0 to 1 (rotation symbol `0+`).
pub fn minimize_heteroclinic(f: &GeneratingFamily, o: &HeteroclinicOptions) -> Result<Configuration> {
    f.validate()?;
    let (n, _) = resolve_span(f, o)?;
    let c = rate(f);
    let ch = OpenChain::new(f, n, None);
    let mut inits = vec![profile(n, c, n as f64 / 2.0), profile(n, c, n as f64 / 2.0 + 0.5)];
    if f.bump.is_some() {
        // Seed with the minimizer of the hyperbolic part, which avoids the bump when tau sits in a gap.
        let mut h = f.clone();
        h.bump = None;
        h.kind = crate::twist::FamilyKind::Hyperbolic;
        if let Ok(m) = minimize_heteroclinic(&h, &HeteroclinicOptions { n: Some(n), ..*o }) {
            inits.push(m.x);
        }
    }
    let mut best: Option<Configuration> = None;
    for x0 in inits {
        let cfg = run(&ch, x0, &o.minimize);
        if best.as_ref().map(|b| (cfg.converged && !b.converged) || (cfg.converged == b.converged && better(&cfg, b))).unwrap_or(true) {
            best = Some(cfg);
        }
    }
    let best = wall_polish(f, n, &[], best.unwrap(), &o.minimize);
    require_converged(best, "heteroclinic minimization")
}

/// Minimal heteroclinic configuration with `x_j = xi`.
pub fn minimize_pinned_heteroclinic(f: &GeneratingFamily, o: &HeteroclinicOptions, j: usize, xi: f64) -> Result<Configuration> {
    let (n, _) = resolve_span(f, o)?;
    if j == 0 || j >= n {
        return Err(Error::InvalidArgument(format!("pinned site {j} must be interior")));
    }
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("pinned value {xi} must lie in [0, 1]")));
    }
    let c = rate(f);
    let center = if c < 1e-9 || xi <= 0.0 || xi >= 1.0 { n as f64 / 2.0 } else { j as f64 - (PI * xi / 2.0).tan().ln() / c };
    let mut x0 = if c < 1e-9 {
        (0..=n).map(|i| if i <= j { xi * i as f64 / j as f64 } else { xi + (1.0 - xi) * (i - j) as f64 / (n - j) as f64 }).collect()
    } else {
        profile(n, c, center)
    };
    x0[j] = xi;
    let ch = OpenChain::new(f, n, Some(j));
    ch.project(&mut x0);
    let mut inits = vec![x0];
    if f.bump.is_some() {
        // The bump only raises the action, so a hyperbolic minimizer clear of its support is already optimal.
        let mut h = f.clone();
        h.bump = None;
        h.kind = crate::twist::FamilyKind::Hyperbolic;
        if let Ok(m) = minimize_pinned_heteroclinic(&h, &HeteroclinicOptions { n: Some(n), ..*o }, j, xi) {
            inits.push(m.x);
        }
    }
    let mut best: Option<Configuration> = None;
    for x0 in inits {
        let cfg = run(&ch, x0, &o.minimize);
        let take = match &best {
            None => true,
            Some(b) => (cfg.converged && !b.converged) || (cfg.converged == b.converged && better(&cfg, b)),
        };
        if take {
            best = Some(cfg);
        }
    }
    let best = wall_polish(f, n, &[j], best.unwrap(), &o.minimize);
    require_converged(best, "pinned heteroclinic minimization")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    /// Heteroclinic connection of the fixed points `0` and `1`.
    ZeroPlus,
    Rational { p: i64, q: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierValue {
    pub xi: f64,
    pub value: f64,
    pub pinned_action: f64,
    pub free_action: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `xi` is a global minimum of the potential, hence in the Aubry set.
    pub in_fixed_set: bool,
}

/// Peierls barrier evaluator with the free minimum computed once.
pub struct BarrierSolver {
    pub family: GeneratingFamily,
    pub symbol: Symbol,
    pub options: HeteroclinicOptions,
    pub n: usize,
    pub free: Configuration,
}

impl BarrierSolver {
    pub fn new(f: &GeneratingFamily, symbol: Symbol, o: &HeteroclinicOptions) -> Result<Self> {
        f.validate()?;
        let (n, free) = match symbol {
            Symbol::ZeroPlus => {
                if f.is_integrable() {
                    let x = profile(2, 0.0, 1.0);
                    (2, Configuration { action: 0.0, residual: 0.0, iterations: 0, projections: 0, converged: true, positive_definite: true, x, wall_sites: Vec::new() })
                } else {
                    let (n, _) = resolve_span(f, o)?;
                    (n, minimize_heteroclinic(f, &HeteroclinicOptions { n: Some(n), ..*o })?)
                }
            }
            Symbol::Rational { p, q } => (q, minimize_periodic(f, p, q, None, &o.minimize)?.config),
        };
        Ok(BarrierSolver { family: f.clone(), symbol, options: HeteroclinicOptions { n: Some(n), ..*o }, n, free })
    }

    pub fn at(&self, xi: f64) -> Result<BarrierValue> {
        let f = &self.family;
        let xr = xi - xi.floor();
        match self.symbol {
            Symbol::ZeroPlus => {
                if f.v(xr) <= 0.0 {
                    return Ok(BarrierValue { xi, value: 0.0, pinned_action: self.free.action, free_action: self.free.action, residual: 0.0, iterations: 0, in_fixed_set: true });
                }
                let j = self.n / 2;
                let pinned = minimize_pinned_heteroclinic(f, &self.options, j, xr)?;
                let r = pinned.residual;
                Ok(BarrierValue {
                    xi,
                    value: pinned.action - self.free.action,
                    pinned_action: pinned.action,
                    free_action: self.free.action,
                    residual: r.max(self.free.residual),
                    iterations: pinned.iterations + self.free.iterations,
                    in_fixed_set: false,
                })
            }
            Symbol::Rational { p, q } => {
                let pinned = minimize_periodic_pinned(f, p, q, xr, &self.options.minimize)?;
                Ok(BarrierValue {
                    xi,
                    value: pinned.action - self.free.action,
                    pinned_action: pinned.action,
                    free_action: self.free.action,
                    residual: pinned.residual.max(self.free.residual),
                    iterations: pinned.iterations + self.free.iterations,
                    in_fixed_set: false,
                })
            }
        }
    }
}

/// One-shot Peierls barrier at `xi` with default options.
pub fn peierls_barrier(f: &GeneratingFamily, symbol: Symbol, xi: f64) -> Result<BarrierValue> {
    BarrierSolver::new(f, symbol, &HeteroclinicOptions::default())?.at(xi)
}

/// Largest gap of a configuration inside `[lo, hi]`: returns the centre and the distance to the nearest site.
pub fn widest_gap(x: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = x.iter().map(|v| v - v.floor()).collect();
    pts.extend(x.iter().filter(|v| **v >= 1.0).map(|_| 1.0));
    pts.sort_by(f64::total_cmp);
    let dist = |t: f64| pts.iter().map(|p| (p - t).abs()).fold(f64::INFINITY, f64::min);
    let mut cands = vec![lo, hi];
    for w in pts.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        if (lo..=hi).contains(&m) {
            cands.push(m);
        }
    }
    cands.into_iter().map(|t| (t, dist(t))).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
}

/// Check `x_{i+1} - x_{i-1} >= 2 sqrt(u(x_i))` for `x_i` in `[1/4, 3/4]`; returns the smallest slack.
pub fn uwith_slack(x: &[f64], u: impl Fn(f64) -> f64) -> f64 {
    (1..x.len() - 1).filter(|i| (0.25..=0.75).contains(&x[*i])).map(|i| (x[i + 1] - x[i - 1]) - 2.0 * u(x[i]).max(0.0).sqrt()).fold(f64::INFINITY, f64::min)
}

/// Smallest slack of `x_{i+1} - x_i >= Delta/2` over sites with `x_i` in `[1/4, 3/4]`.
pub fn lowstep_slack(x: &[f64], width: f64) -> f64 {
    (0..x.len() - 1).filter(|i| (0.25..=0.75).contains(&x[*i])).map(|i| x[i + 1] - x[i] - width / 2.0).fold(f64::INFINITY, f64::min)
}

/// Number of sign changes of `a - b` (piecewise-linear graphs over the common index range).
pub fn crossings(a: &[f64], b: &[f64]) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        let s = if d > 1e-12 {
            1
        } else if d < -1e-12 {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierRow {
    pub xi: f64,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub fn write_barrier_csv(path: &Path, rows: &[BarrierValue]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(BarrierRow { xi: r.xi, value: r.value, residual: r.residual, iterations: r.iterations })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SiteRow {
    i: usize,
    x_i: f64,
}

pub fn write_configuration_csv(path: &Path, x: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, v) in x.iter().enumerate() {
        w.serialize(SiteRow { i, x_i: *v })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotonic_projection() {
        let mut v = vec![0.1, 0.3, 0.2, 0.5];
        isotonic(&mut v, 0.0, 1.0);
        assert_eq!(v, vec![0.1, 0.25, 0.25, 0.5]);
    }

    #[test]
    fn thomas_solves_dirichlet_laplacian() {
        let diag = vec![2.0; 5];
        let free = vec![false, true, true, true, false];
        let r = vec![0.0, 1.0, 0.0, 1.0, 0.0];
        let (s, pd) = thomas(&diag, &free, &r).unwrap();
        assert!(pd);
        for i in 1..4 {
            let lhs = 2.0 * s[i] - s[i - 1] * free[i - 1] as u8 as f64 - s[i + 1] * free[i + 1] as u8 as f64;
            assert!((lhs - r[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_minimizer() {
        let f = GeneratingFamily::hyperbolic(0.2);
        let m = minimize_periodic(&f, 0, 1, Some(vec![0.3]), &MinimizeOptions::default()).unwrap();
        let x = m.config.x[0];
        assert!((x - x.round()).abs() < 1e-10);
        assert!(m.config.action.abs() < 1e-12);
    }

    #[test]
    fn span_guard() {
        let f = GeneratingFamily::hyperbolic(0.01);
        let o = HeteroclinicOptions { n: Some(50), ..Default::default() };
        assert_eq!(minimize_heteroclinic(&f, &o), Err(Error::InsufficientSpan { n: 50, required: 100 }));
    }

    #[test]
    fn crossing_count() {
        assert_eq!(crossings(&[0.0, 1.0, 2.0], &[1.0, 1.5, 1.0]), 1);
        assert_eq!(crossings(&[0.0, 1.0], &[0.5, 1.5]), 0);
    }
}
