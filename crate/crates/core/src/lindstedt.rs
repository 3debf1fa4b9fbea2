//! Lindstedt series of the conjugacy `u` for the kick `eps sin(2 pi q_m x)`.
//!
//! The coefficients solve `u(t + w) - 2 u(t) + u(t - w) = eps sin(2 pi q_m (t + u(t)))`
//! order by order in Fourier modes `nu = j q_m`. The exponential
//! `exp(2 pi i sigma q_m u)` is expanded by the recurrence
//! `n E_n = c sum_i i u_i E_{n-i}`, `c = 2 pi i sigma q_m`, which resums the
//! multinomial sums of the explicit formula.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::Path;

use astro_float::BigFloat;
use num_bigint::BigInt;
use num_complex::Complex64;
use serde::Serialize;

use crate::cf::{brjuno_sum, BrjunoVariant, RotationValue, Schedule};
use crate::twist::{CylinderMap, GeneratingFamily};
use crate::{hp, Error, Interval, Result};

/// Scalar field used by the recurrence and the evaluators.
pub trait Real: Clone + Debug {
    fn from_f64(x: f64) -> Self;
    /// `num / 2^scale`.
    fn from_dyadic(num: &BigInt, scale: u32) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn pi() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_dyadic(num: &BigInt, scale: u32) -> Self {
        crate::cf::dyadic_to_f64(num, scale)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn add(&self, o: &Self) -> Self {
        self + o
    }

    fn sub(&self, o: &Self) -> Self {
        self - o
    }

    fn mul(&self, o: &Self) -> Self {
        self * o
    }

    fn div(&self, o: &Self) -> Self {
        self / o
    }

    fn neg(&self) -> Self {
        -self
    }

    fn sin(&self) -> Self {
        f64::sin(*self)
    }

    fn cos(&self) -> Self {
        f64::cos(*self)
    }

    fn pi() -> Self {
        std::f64::consts::PI
    }
}

/// Working precision of [`Hp`] in bits.
pub const HP_BITS: usize = 256;

/// High-precision scalar.
#[derive(Clone, Debug)]
pub struct Hp(pub BigFloat);

impl Real for Hp {
    fn from_f64(x: f64) -> Self {
        Hp(hp::from_f64(x, HP_BITS))
    }

    fn from_dyadic(num: &BigInt, scale: u32) -> Self {
        let n = hp::from_bigint(num, HP_BITS.max(num.bits() as usize + 64));
        let mut d = n.div(&hp::from_biguint(&(num_bigint::BigUint::from(1u32) << scale as usize), HP_BITS), HP_BITS, hp::RM);
        if d.is_zero() {
            d = BigFloat::from_word(0, HP_BITS);
        }
        Hp(d)
    }

    fn to_f64(&self) -> f64 {
        hp::to_f64(&self.0)
    }

    fn add(&self, o: &Self) -> Self {
        Hp(self.0.add(&o.0, HP_BITS, hp::RM))
    }

    fn sub(&self, o: &Self) -> Self {
        Hp(self.0.sub(&o.0, HP_BITS, hp::RM))
    }

    fn mul(&self, o: &Self) -> Self {
        Hp(self.0.mul(&o.0, HP_BITS, hp::RM))
    }

    fn div(&self, o: &Self) -> Self {
        Hp(self.0.div(&o.0, HP_BITS, hp::RM))
    }

    fn neg(&self) -> Self {
        Hp(self.0.neg())
    }

    fn sin(&self) -> Self {
        Hp(hp::with_consts(|cc| self.0.sin(HP_BITS, hp::RM, cc)))
    }

    fn cos(&self) -> Self {
        Hp(hp::with_consts(|cc| self.0.cos(HP_BITS, hp::RM, cc)))
    }

    fn pi() -> Self {
        Hp(hp::with_consts(|cc| cc.pi(HP_BITS, hp::RM)))
    }
}

/// Complex number over a [`Real`].
#[derive(Clone, Debug)]
pub struct Cx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cx { re, im }
    }

    pub fn zero() -> Self {
        Cx { re: T::zero(), im: T::zero() }
    }

    pub fn add(&self, o: &Self) -> Self {
        Cx { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Cx { re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)), im: self.re.mul(&o.im).add(&self.im.mul(&o.re)) }
    }

    pub fn scale(&self, s: &T) -> Self {
        Cx { re: self.re.mul(s), im: self.im.mul(s) }
    }

    pub fn conj(&self) -> Self {
        Cx { re: self.re.clone(), im: self.im.neg() }
    }

    /// `e^{i t}`.
    pub fn expi(t: &T) -> Self {
        Cx { re: t.cos(), im: t.sin() }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    fn is_exact_zero(&self) -> bool {
        self.re.to_f64() == 0.0 && self.im.to_f64() == 0.0
    }
}

/// Cached small divisors `gamma(nu) = 2 (cos(2 pi omega nu) - 1)`.
pub struct DivisorOracle {
    pub omega: RotationValue,
    cache: BTreeMap<i64, Interval>,
}

impl DivisorOracle {
    pub fn new(omega: RotationValue) -> Self {
        DivisorOracle { omega, cache: BTreeMap::new() }
    }

    /// Interval enclosure; `gamma(0) = 0` and any other enclosure touching 0 is an error.
    pub fn gamma(&mut self, nu: i64) -> Result<Interval> {
        if nu == 0 {
            return Ok(Interval::point(0.0));
        }
        if let Some(g) = self.cache.get(&nu) {
            return Ok(*g);
        }
        let g = self.omega.gamma(nu)?;
        self.cache.insert(nu, g);
        Ok(g)
    }

    /// `gamma(nu)` evaluated in `T` from the exact midpoint of the enclosure.
    pub fn gamma_in<T: Real>(&mut self, nu: i64) -> Result<T> {
        self.gamma(nu)?;
        let (r, sc) = self.omega.frac_signed_dyadic(nu);
        let s = T::pi().mul(&T::from_dyadic(&r, sc)).sin();
        Ok(T::from_f64(-4.0).mul(&s).mul(&s))
    }
}

/// Coefficients `u^{(k)}_{j q_m}` for `k = 1..=K`, `|j| <= K`.
#[derive(Clone, Debug)]
pub struct LindstedtTable<T: Real = f64> {
    pub qm: u64,
    pub order: usize,
    pub omega: RotationValue,
    omega_t: T,
    coeff: Vec<Vec<Cx<T>>>,
    /// Largest `|rhs_0| / max_j |rhs_j|` met at the zero mode, which is set to 0.
    pub zero_mode_leak: f64,
}

fn conv<T: Real>(a: &[Cx<T>], b: &[Cx<T>], off: usize) -> Vec<Cx<T>> {
    let n = a.len();
    let mut out = vec![Cx::zero(); n];
    for (ia, x) in a.iter().enumerate() {
        if x.is_exact_zero() {
            continue;
        }
        for (ib, y) in b.iter().enumerate() {
            if y.is_exact_zero() {
                continue;
            }
            let j = ia as i64 + ib as i64 - off as i64;
            if j < 0 || j as usize >= n {
                continue;
            }
            out[j as usize] = out[j as usize].add(&x.mul(y));
        }
    }
    out
}

/// Coefficients in binary64.
pub fn compute_coefficients(omega: &RotationValue, qm: u64, k_max: usize) -> Result<LindstedtTable<f64>> {
    compute_coefficients_in::<f64>(omega, qm, k_max)
}

/// Coefficients over an arbitrary scalar field.
pub fn compute_coefficients_in<T: Real>(omega: &RotationValue, qm: u64, k_max: usize) -> Result<LindstedtTable<T>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("order K must be at least 1".into()));
    }
    if qm == 0 {
        return Err(Error::InvalidArgument("q_m must be positive".into()));
    }
    let mut oracle = DivisorOracle::new(omega.clone());
    let off = k_max;
    let width = 2 * k_max + 1;
    let q = qm as i64;
    let (wn, ws) = omega.mid_dyadic();
    let omega_t = T::from_dyadic(&wn, ws);
    let two_pi_q = T::from_f64(2.0).mul(&T::pi()).mul(&T::from_f64(qm as f64));
    let mut gammas = vec![T::zero(); width];
    for j in 1..=k_max as i64 {
        let g = oracle.gamma_in::<T>(j * q).map_err(|e| match e {
            Error::SingularDivisor(nu) => Error::DivisorVanishes { order: j as usize, nu },
            e => e,
        })?;
        gammas[off + j as usize] = g.clone();
        gammas[off - j as usize] = g;
    }
    let mut u: Vec<Vec<Cx<T>>> = vec![vec![Cx::zero(); width]];
    // e[s][n]: order-n coefficient of exp(2 pi i sigma q u), s = 0 for sigma = +1.
    let mut e: [Vec<Vec<Cx<T>>>; 2] = [Vec::new(), Vec::new()];
    for es in e.iter_mut() {
        let mut e0 = vec![Cx::zero(); width];
        e0[off] = Cx::new(T::from_f64(1.0), T::zero());
        es.push(e0);
    }
    let mut leak: f64 = 0.0;
    for k in 1..=k_max {
        let mut rhs = vec![Cx::<T>::zero(); width];
        for (s, sigma) in [(0usize, 1i64), (1, -1)] {
            // sigma / (2i) = -i sigma / 2.
            let f = Cx::new(T::zero(), T::from_f64(-0.5 * sigma as f64));
            let prev = &e[s][k - 1];
            for (idx, val) in prev.iter().enumerate() {
                let j = idx as i64 + sigma;
                if j < 0 || j as usize >= width || val.is_exact_zero() {
                    continue;
                }
                rhs[j as usize] = rhs[j as usize].add(&f.mul(val));
            }
        }
        let mut uk = vec![Cx::zero(); width];
        let scale = rhs.iter().map(|r| r.to_c64().norm()).fold(0.0, f64::max);
        for (idx, r) in rhs.iter().enumerate() {
            if idx == off {
                if scale > 0.0 {
                    leak = leak.max(r.to_c64().norm() / scale);
                }
                continue;
            }
            if r.is_exact_zero() {
                continue;
            }
            let g = &gammas[idx];
            uk[idx] = Cx::new(r.re.div(g), r.im.div(g));
        }
        u.push(uk);
        if k < k_max {
            for (s, sigma) in [(0usize, 1.0f64), (1, -1.0)] {
                let mut acc = vec![Cx::<T>::zero(); width];
                for i in 1..=k {
                    let term = conv(&u[i], &e[s][k - i], off);
                    let w = T::from_f64(i as f64);
                    for (a, t) in acc.iter_mut().zip(&term) {
                        *a = a.add(&t.scale(&w));
                    }
                }
                // E_k = (c / k) acc with c = 2 pi i sigma q.
                let c = Cx::new(T::zero(), two_pi_q.mul(&T::from_f64(sigma / k as f64)));
                let ek: Vec<Cx<T>> = acc.iter().map(|a| c.mul(a)).collect();
                e[s].push(ek);
            }
        }
    }
    Ok(LindstedtTable { qm, order: k_max, omega: omega.clone(), omega_t, coeff: u, zero_mode_leak: leak })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusRow {
    pub k: usize,
    pub sup: f64,
    pub r_k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusReport {
    pub rows: Vec<RadiusRow>,
    /// Median of the last `ceil(K/3)` root-test values; infinite when every order vanishes.
    pub rho: f64,
    pub infinite: bool,
    /// Orders with identically vanishing coefficients.
    pub skipped: Vec<usize>,
}

impl RadiusReport {
    /// `(max - min) / median` over the last `n` values of `r_k`.
    pub fn tail_spread(&self, n: usize) -> f64 {
        let r: Vec<f64> = self.rows.iter().filter_map(|r| r.r_k).collect();
        if r.len() < n || n == 0 {
            return f64::INFINITY;
        }
        let t = &r[r.len() - n..];
        let mx = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = t.iter().cloned().fold(f64::INFINITY, f64::min);
        (mx - mn) / median(t)
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Root-test radius from per-order suprema.
pub fn radius_from_sups(sups: &[f64]) -> RadiusReport {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, s) in sups.iter().enumerate() {
        let k = i + 1;
        let r_k = if *s > 0.0 {
            Some(s.powf(-1.0 / k as f64))
        } else {
            skipped.push(k);
            None
        };
        rows.push(RadiusRow { k, sup: *s, r_k });
    }
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.r_k).collect();
    let tail = sups.len().div_ceil(3);
    let (rho, infinite) = if vals.is_empty() { (f64::INFINITY, true) } else { (median(&vals[vals.len().saturating_sub(tail)..]), false) };
    RadiusReport { rows, rho, infinite, skipped }
}

impl<T: Real> LindstedtTable<T> {
    /// A table whose every coefficient vanishes (no perturbation).
    pub fn unperturbed(omega: &RotationValue, qm: u64, k_max: usize) -> Self {
        let (wn, ws) = omega.mid_dyadic();
        LindstedtTable {
            qm,
            order: k_max,
            omega: omega.clone(),
            omega_t: T::from_dyadic(&wn, ws),
            coeff: vec![vec![Cx::zero(); 2 * k_max + 1]; k_max + 1],
            zero_mode_leak: 0.0,
        }
    }

    pub fn omega_value(&self) -> &T {
        &self.omega_t
    }

    /// `u^{(k)}_{j q_m}`; zero outside the stored range.
    pub fn coeff(&self, k: usize, j: i64) -> Cx<T> {
        if k == 0 || k > self.order || j.unsigned_abs() as usize > self.order {
            return Cx::zero();
        }
        self.coeff[k][(j + self.order as i64) as usize].clone()
    }

    pub fn coeff_c64(&self, k: usize, j: i64) -> Complex64 {
        self.coeff(k, j).to_c64()
    }

    /// `e^{2 pi i j q theta}` for `j = 0..=K`.
    fn modes(&self, theta: &T) -> Vec<Cx<T>> {
        let t = T::from_f64(2.0).mul(&T::pi()).mul(&T::from_f64(self.qm as f64)).mul(theta);
        let e1 = Cx::expi(&t);
        let mut out = vec![Cx::new(T::from_f64(1.0), T::zero())];
        for j in 1..=self.order {
            out.push(out[j - 1].mul(&e1));
        }
        out
    }

    fn order_value(&self, k: usize, w: &[Cx<T>]) -> Cx<T> {
        let mut acc = Cx::zero();
        for j in -(self.order as i64)..=self.order as i64 {
            let c = &self.coeff[k][(j + self.order as i64) as usize];
            if c.is_exact_zero() {
                continue;
            }
            let ph = if j >= 0 { w[j as usize].clone() } else { w[(-j) as usize].conj() };
            acc = acc.add(&c.mul(&ph));
        }
        acc
    }

    /// `u^{(k)}(theta)` including its (vanishing) imaginary part.
    pub fn u_order_complex(&self, k: usize, theta: &T) -> Cx<T> {
        if k == 0 || k > self.order {
            return Cx::zero();
        }
        self.order_value(k, &self.modes(theta))
    }

    /// Truncated series `sum_k eps^k u^{(k)}(theta)`, complex.
    pub fn u_complex(&self, theta: &T, eps: &T) -> Cx<T> {
        let w = self.modes(theta);
        let mut acc = Cx::zero();
        for k in (1..=self.order).rev() {
            acc = acc.add(&self.order_value(k, &w)).scale(eps);
        }
        acc
    }

    pub fn u(&self, theta: &T, eps: &T) -> T {
        self.u_complex(theta, eps).re
    }

    fn kick(&self, x: &T, eps: &T) -> T {
        eps.mul(&T::from_f64(2.0).mul(&T::pi()).mul(&T::from_f64(self.qm as f64)).mul(x).sin())
    }

    /// `v(theta) = u(theta) - u(theta - omega) + eps sin(2 pi q (theta + u(theta)))`.
    pub fn v(&self, theta: &T, eps: &T) -> T {
        let ut = self.u(theta, eps);
        let um = self.u(&theta.sub(&self.omega_t), eps);
        ut.sub(&um).add(&self.kick(&theta.add(&ut), eps))
    }

    /// Functional-equation residual at one point.
    pub fn residual_at(&self, theta: &T, eps: &T) -> T {
        let up = self.u(&theta.add(&self.omega_t), eps);
        let u0 = self.u(theta, eps);
        let um = self.u(&theta.sub(&self.omega_t), eps);
        up.sub(&u0.mul(&T::from_f64(2.0))).add(&um).sub(&self.kick(&theta.add(&u0), eps))
    }

    /// `max` over the grid of the functional-equation residual.
    pub fn residual(&self, eps: f64, grid: &[f64]) -> f64 {
        let e = T::from_f64(eps);
        grid.iter().map(|t| self.residual_at(&T::from_f64(*t), &e).to_f64().abs()).fold(0.0, f64::max)
    }

    /// `sup_theta |u^{(k)}(theta)|` for `k = 1..=K` on a uniform grid.
    pub fn order_sups(&self, grid_size: usize) -> Vec<f64> {
        let mut sups = vec![0.0f64; self.order];
        for g in 0..grid_size {
            let w = self.modes(&T::from_f64(g as f64 / grid_size as f64));
            for (k, s) in sups.iter_mut().enumerate() {
                *s = s.max(self.order_value(k + 1, &w).to_c64().norm());
            }
        }
        sups
    }

    /// Default sup grid: `32 (K q_m + 1)` points.
    pub fn default_grid_size(&self) -> usize {
        32 * (self.order * self.qm as usize + 1)
    }

    pub fn radius_estimate(&self) -> RadiusReport {
        radius_from_sups(&self.order_sups(self.default_grid_size()))
    }

    /// Serialized as `{"k,j": [re, im]}` over the nonzero coefficients.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for k in 1..=self.order {
            for j in -(self.order as i64)..=self.order as i64 {
                let c = self.coeff_c64(k, j);
                if c.re != 0.0 || c.im != 0.0 {
                    m.insert(format!("{k},{j}"), serde_json::json!([c.re, c.im]));
                }
            }
        }
        serde_json::Value::Object(m)
    }
}

pub fn write_radius_csv(path: &Path, r: &RadiusReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "sup", "r_k"])?;
    for row in &r.rows {
        w.write_record([row.k.to_string(), format!("{:e}", row.sup), row.r_k.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform grid of `n` points on `[0, 1)`, offset to avoid symmetry points.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.37) / n as f64).collect()
}

/// Least-squares slope of `ln residual` against `ln eps`.
pub fn loglog_slope(eps: &[f64], res: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = res.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub eps: f64,
    /// `max |x(theta) + y(theta) - x(theta + omega)|` and the `y` analogue, combined.
    pub max_error: f64,
    pub series_residual: f64,
}

/// Image of the parametrized circle `(theta + u, omega + v)` under the map, compared with the shift.
pub fn circle_invariance(table: &LindstedtTable<f64>, eps: f64, grid: &[f64]) -> Result<InvarianceReport> {
    let map = CylinderMap::new(GeneratingFamily::with_kick_amplitude(eps, table.qm)?);
    let w = *table.omega_value();
    let mut err: f64 = 0.0;
    for &t in grid {
        let x = t + table.u(&t, &eps);
        let y = w + table.v(&t, &eps);
        let (xp, yp) = map.step((x, y));
        let t1 = t + w;
        let x1 = t1 + table.u(&t1, &eps);
        let y1 = w + table.v(&t1, &eps);
        err = err.max((xp - x1).abs()).max((yp - y1).abs());
    }
    Ok(InvarianceReport { eps, max_error: err, series_residual: table.residual(eps, grid) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: usize,
    pub qm: u64,
    pub brjuno_sum: f64,
    /// `2 ln(2 q_m) + 4 q_m S`.
    pub bound_rate: f64,
    /// `ln sup |u^{(k)}| / k` per order.
    pub rates: Vec<f64>,
    /// Asymptotic rate `-ln rho`.
    pub measured_rate: f64,
    /// Smallest `C` with `sup |u^{(k)}| <= C^k (2 q_m)^{2k} e^{4 q_m k S}` for all computed `k`.
    pub fitted_constant: f64,
    pub rate_gap: f64,
    pub pass: bool,
}

/// Compare coefficient growth with the Brjuno-type bound.
pub fn bound_report(table: &LindstedtTable<f64>, s: &Schedule, m: usize) -> Result<BoundReport> {
    let br = brjuno_sum(s, 1.0, m, None, BrjunoVariant::Standard)?;
    let qm = table.qm;
    let bound_rate = 2.0 * (2.0 * qm as f64).ln() + 4.0 * qm as f64 * br.sum.hi;
    let sups = table.order_sups(table.default_grid_size());
    let rates: Vec<f64> = sups.iter().enumerate().map(|(i, s)| s.ln() / (i + 1) as f64).collect();
    let radius = radius_from_sups(&sups);
    let measured_rate = if radius.infinite { f64::NEG_INFINITY } else { -radius.rho.ln() };
    let fitted = rates.iter().filter(|r| r.is_finite()).map(|r| r - bound_rate).fold(f64::NEG_INFINITY, f64::max).exp();
    let gap = bound_rate - measured_rate;
    Ok(BoundReport {
        m,
        qm,
        brjuno_sum: br.sum.hi,
        bound_rate,
        rates,
        measured_rate,
        fitted_constant: fitted,
        rate_gap: gap,
        pass: fitted.is_finite() && measured_rate <= bound_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_base_case() {
        let w = RotationValue::golden(256);
        let t = compute_coefficients(&w, 1, 3).unwrap();
        let g = w.gamma(1).unwrap().mid();
        let c = t.coeff_c64(1, 1);
        assert!(c.re.abs() < 1e-16);
        assert!((c.im - (-1.0 / (2.0 * g))).abs() < 1e-15);
        assert_eq!(t.coeff_c64(2, 1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hp_matches_binary64() {
        let w = RotationValue::golden(256);
        let a = compute_coefficients(&w, 1, 6).unwrap();
        let b = compute_coefficients_in::<Hp>(&w, 1, 6).unwrap();
        for k in 1..=6 {
            for j in -6..=6 {
                let (x, y) = (a.coeff_c64(k, j), b.coeff_c64(k, j));
                assert!((x - y).norm() <= 1e-13 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn zero_order_rejected() {
        assert!(compute_coefficients(&RotationValue::golden(64), 1, 0).is_err());
    }
}
