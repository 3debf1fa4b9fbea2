//! Gevrey-class building blocks.
//!
//! With `p = 1/(alpha - 1)` the flat exponential
//!
//! ```text
//! f_lambda(x) = exp(-lambda sqrt(2) x^-p)   for x > 0,   0 otherwise
//! ```
//!
//! has derivatives bounded by `(2/sin sigma)^k (k/(lambda p e))^{k/p} k!`, and
//! its products give compactly supported bumps of finite Gevrey norm once
//! `lambda` exceeds `(2 L^alpha / sin sigma)^p / p`.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use astro_float::BigFloat;
use serde::{Deserialize, Serialize};

use crate::{hp, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    pub alpha: f64,
    pub l: f64,
}

impl GevreyParams {
    pub fn new(alpha: f64, l: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} must exceed 1")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("L = {l} must be positive")));
        }
        Ok(GevreyParams { alpha, l })
    }

    pub fn p(&self) -> f64 {
        1.0 / (self.alpha - 1.0)
    }

    pub fn sigma(&self) -> f64 {
        PI / 4.0 * (1.0f64).min(1.0 / self.p())
    }

    /// Threshold above which bump norms are finite.
    pub fn lambda0(&self) -> f64 {
        let p = self.p();
        (2.0 * self.l.powf(self.alpha) / self.sigma().sin()).powf(p) / p
    }

    /// The working value `lambda0 + 1`.
    pub fn lambda(&self) -> f64 {
        self.lambda0() + 1.0
    }
}

/// `f_lambda(x)`.
pub fn flat_exp(lambda: f64, p: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-lambda * SQRT_2 * x.powf(-p)).exp()
    }
}

/// `ln f_lambda(x)`, `-inf` for `x <= 0`.
pub fn flat_exp_ln(lambda: f64, p: f64, x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        -lambda * SQRT_2 * x.powf(-p)
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `ln` of the Cauchy bound on `sup |f_lambda^(k)|`.
pub fn cauchy_bound_ln(lambda: f64, p: f64, sigma: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    kf * (2.0 / sigma.sin()).ln() + kf / p * (kf / (lambda * p * std::f64::consts::E)).ln() + ln_factorial(k)
}

/// `(2/sin sigma)^k (k/(lambda p e))^{k/p} k!`; equals 1 at `k = 0`.
pub fn cauchy_bound(lambda: f64, p: f64, sigma: f64, k: usize) -> f64 {
    cauchy_bound_ln(lambda, p, sigma, k).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    pub ln_value: f64,
    pub terms: Vec<f64>,
    /// Ratios of consecutive terms.
    pub ratios: Vec<f64>,
    /// Last three consecutive ratios are below 1/2.
    pub converging: bool,
}

/// Truncated norm `sum_{k<=K} L^{k alpha} B_k / (k!)^alpha` for derivative bounds `B_k`.
pub fn gevrey_norm_truncated(bounds: &[f64], alpha: f64, l: f64, k_max: i64) -> Result<NormReport> {
    let ln_bounds: Vec<f64> = bounds.iter().map(|b| if *b > 0.0 { b.ln() } else { f64::NEG_INFINITY }).collect();
    gevrey_norm_truncated_ln(&ln_bounds, alpha, l, k_max)
}

/// Same as [`gevrey_norm_truncated`] with bounds given by their logarithms.
pub fn gevrey_norm_truncated_ln(ln_bounds: &[f64], alpha: f64, l: f64, k_max: i64) -> Result<NormReport> {
    if k_max < 0 {
        return Err(Error::InvalidArgument(format!("truncation order K = {k_max} is negative")));
    }
    let k_max = k_max as usize;
    if ln_bounds.len() <= k_max {
        return Err(Error::InvalidArgument(format!("need {} derivative bounds, got {}", k_max + 1, ln_bounds.len())));
    }
    let ln_terms: Vec<f64> =
        (0..=k_max).map(|k| k as f64 * alpha * l.ln() + ln_bounds[k] - alpha * ln_factorial(k)).collect();
    let top = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ln_value = if top == f64::NEG_INFINITY { top } else { top + ln_terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() };
    let ratios: Vec<f64> = ln_terms.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let converging = ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|r| *r < 0.5);
    Ok(NormReport { value: ln_value.exp(), ln_value, terms: ln_terms.iter().map(|t| t.exp()).collect(), ratios, converging })
}

/// Bump of height scale `delta^2` supported on `[tau - delta/8, tau + delta/8]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub params: GevreyParams,
    pub lambda: f64,
    pub delta: f64,
    pub tau: f64,
}

/// `Delta_m = exp(-(b/2) m^beta)`, the square root of `delta_m = exp(-b m^beta)`.
pub fn level_width(b: f64, beta: f64, m: usize) -> f64 {
    (-(b / 2.0) * (m as f64).powf(beta)).exp()
}

impl Bump {
    pub fn new(params: GevreyParams, delta: f64, tau: f64) -> Result<Self> {
        Self::with_lambda(params, params.lambda(), delta, tau)
    }

    pub fn with_lambda(params: GevreyParams, lambda: f64, delta: f64, tau: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("Delta = {delta} must lie in (0, 1]")));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        Ok(Bump { params, lambda, delta, tau })
    }

    /// Bump of level `m` for the schedule parameters `b, beta`.
    pub fn for_level(params: GevreyParams, b: f64, beta: f64, m: usize, tau: f64) -> Result<Self> {
        Self::new(params, level_width(b, beta, m), tau)
    }

    pub fn half_width(&self) -> f64 {
        self.delta / 8.0
    }

    /// Support of one period of `xi`.
    pub fn support(&self) -> (f64, f64) {
        (self.tau - self.half_width(), self.tau + self.half_width())
    }

    /// Distances `(s, t)` to the two support edges of `v`, if `y` lies inside.
    fn edges(&self, y: f64) -> Option<(f64, f64)> {
        let y = y - y.floor();
        let w = self.half_width();
        let s = w - 0.5 + y;
        let t = w + 0.5 - y;
        (s > 0.0 && t > 0.0).then_some((s, t))
    }

    fn ln_v_at(&self, y: f64) -> f64 {
        match self.edges(y) {
            None => f64::NEG_INFINITY,
            Some((s, t)) => {
                let p = self.params.p();
                2.0 * self.delta.ln() + flat_exp_ln(self.lambda, p, s) + flat_exp_ln(self.lambda, p, t)
            }
        }
    }

    fn clamp(ln: f64) -> (f64, bool) {
        if ln == f64::NEG_INFINITY {
            return (0.0, false);
        }
        let v = ln.exp();
        if v < f64::MIN_POSITIVE {
            (0.0, true)
        } else {
            (v, false)
        }
    }

    /// `ln v(x)`; `-inf` off the support.
    pub fn ln_v(&self, x: f64) -> f64 {
        self.ln_v_at(x)
    }

    /// `v(x) = Delta^2 f(Delta/8 - 1/2 + x) f(Delta/8 + 1/2 - x)`, 1-periodic, centred at 1/2.
    pub fn v(&self, x: f64) -> f64 {
        Self::clamp(self.ln_v_at(x)).0
    }

    /// `v(x)` plus whether a nonzero value was clamped to 0 below the normal range.
    pub fn v_checked(&self, x: f64) -> (f64, bool) {
        Self::clamp(self.ln_v_at(x))
    }

    fn shift(&self, x: f64) -> f64 {
        x - (self.tau - 0.5)
    }

    /// `xi(x) = v(x - (tau - 1/2))`, centred at `tau`.
    pub fn xi(&self, x: f64) -> f64 {
        self.v(self.shift(x))
    }

    pub fn xi_checked(&self, x: f64) -> (f64, bool) {
        self.v_checked(self.shift(x))
    }

    pub fn ln_xi(&self, x: f64) -> f64 {
        self.ln_v_at(self.shift(x))
    }

    /// `xi'(x)`, evaluated through logarithms to avoid `0 * inf`.
    pub fn xi_d1(&self, x: f64) -> f64 {
        let y = self.shift(x);
        let Some((s, t)) = self.edges(y) else { return 0.0 };
        let p = self.params.p();
        let c = self.lambda * SQRT_2 * p;
        let g = c * (s.powf(-p - 1.0) - t.powf(-p - 1.0));
        if g == 0.0 {
            return 0.0;
        }
        let l = self.ln_v_at(y) + g.abs().ln();
        g.signum() * l.exp()
    }

    /// `xi''(x)`.
    pub fn xi_d2(&self, x: f64) -> f64 {
        let y = self.shift(x);
        let Some((s, t)) = self.edges(y) else { return 0.0 };
        let p = self.params.p();
        let c = self.lambda * SQRT_2 * p;
        let lnv = self.ln_v_at(y);
        // xi'' = xi (g^2 + g') with g' < 0; combine in log space term by term.
        let g = c * (s.powf(-p - 1.0) - t.powf(-p - 1.0));
        let gp = -c * (p + 1.0) * (s.powf(-p - 2.0) + t.powf(-p - 2.0));
        let a = if g == 0.0 { 0.0 } else { (lnv + 2.0 * g.abs().ln()).exp() };
        let b = (lnv + gp.abs().ln()).exp();
        let r = a - b;
        if r.is_nan() {
            0.0
        } else {
            r
        }
    }

    /// Closed-form maximum `v(1/2) = xi(tau) = Delta^2 exp(-lambda 2^{3p + 3/2} Delta^-p)`.
    pub fn max_value(&self) -> f64 {
        Self::clamp(self.max_value_ln()).0
    }

    pub fn max_value_ln(&self) -> f64 {
        let p = self.params.p();
        2.0 * self.delta.ln() - self.lambda * 2f64.powf(3.0 * p + 1.5) * self.delta.powf(-p)
    }

    /// Upper bounds on `sup |xi^(k)|`, `k = 0..=k_max`, from the Leibniz rule and the Cauchy bound.
    pub fn derivative_bounds_ln(&self, k_max: usize) -> Vec<f64> {
        let p = self.params.p();
        let sg = self.params.sigma();
        let b: Vec<f64> = (0..=k_max).map(|k| cauchy_bound_ln(self.lambda, p, sg, k)).collect();
        (0..=k_max)
            .map(|k| {
                let terms: Vec<f64> = (0..=k).map(|j| ln_binom(k, j) + b[j] + b[k - j]).collect();
                let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                2.0 * self.delta.ln() + top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
            })
            .collect()
    }

    /// Truncated Gevrey norm of `xi` from [`Bump::derivative_bounds_ln`].
    pub fn norm_truncated(&self, k_max: usize) -> Result<NormReport> {
        gevrey_norm_truncated_ln(&self.derivative_bounds_ln(k_max), self.params.alpha, self.params.l, k_max as i64)
    }
}

const FD_BITS: usize = 320;

fn flat_exp_hp(lambda: &BigFloat, p: &BigFloat, x: &BigFloat) -> BigFloat {
    hp::with_consts(|cc| {
        let e = x.ln(FD_BITS, hp::RM, cc).mul(p, FD_BITS, hp::RM).neg().exp(FD_BITS, hp::RM, cc);
        let sq2 = BigFloat::from_word(2, FD_BITS).sqrt(FD_BITS, hp::RM);
        lambda.mul(&sq2, FD_BITS, hp::RM).mul(&e, FD_BITS, hp::RM).neg().exp(FD_BITS, hp::RM, cc)
    })
}

/// `k`-th central difference quotient of `f_lambda` at `x` with step `h`, in 320-bit arithmetic.
pub fn flat_exp_fd(lambda: f64, p: f64, k: usize, x: f64, h: f64) -> f64 {
    let lam = hp::from_f64(lambda, FD_BITS);
    let pp = hp::from_f64(p, FD_BITS);
    let xb = hp::from_f64(x, FD_BITS);
    let hb = hp::from_f64(h, FD_BITS);
    let mut acc = BigFloat::from_word(0, FD_BITS);
    for j in 0..=k {
        let off = hp::from_f64(k as f64 / 2.0 - j as f64, FD_BITS).mul(&hb, FD_BITS, hp::RM);
        let y = xb.add(&off, FD_BITS, hp::RM);
        if y.is_negative() || y.is_zero() {
            continue;
        }
        let c = hp::from_f64(ln_binom(k, j).exp().round(), FD_BITS);
        let t = flat_exp_hp(&lam, &pp, &y).mul(&c, FD_BITS, hp::RM);
        acc = if j % 2 == 0 { acc.add(&t, FD_BITS, hp::RM) } else { acc.sub(&t, FD_BITS, hp::RM) };
    }
    let hk = hp::from_f64(h.powi(k as i32), FD_BITS);
    hp::to_f64(&acc.div(&hk, FD_BITS, hp::RM))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdRow {
    pub k: usize,
    pub fd_sup: f64,
    pub argmax: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Finite-difference sup of `|f_lambda^(k)|` over `x_i = i x_max / n`, compared with [`cauchy_bound`].
pub fn fd_bound_check(lambda: f64, p: f64, sigma: f64, k_max: usize, x_max: f64, n: usize) -> Vec<FdRow> {
    (0..=k_max)
        .map(|k| {
            let h = 1e-5 * x_max;
            let (mut sup, mut arg) = (0.0f64, 0.0);
            for i in 1..=n {
                let x = x_max * i as f64 / n as f64;
                let d = if k == 0 { flat_exp(lambda, p, x) } else { flat_exp_fd(lambda, p, k, x, h) }.abs();
                if d > sup {
                    sup = d;
                    arg = x;
                }
            }
            let bound = cauchy_bound(lambda, p, sigma, k);
            FdRow { k, fd_sup: sup, argmax: arg, bound, ratio: sup / bound }
        })
        .collect()
}

impl Bump {
    /// `xi(tau)` from the product definition, evaluated in 320-bit arithmetic.
    pub fn peak_hp(&self) -> f64 {
        let lam = hp::from_f64(self.lambda, FD_BITS);
        let pp = hp::from_f64(self.params.p(), FD_BITS);
        let w = hp::from_f64(self.delta, FD_BITS).div(&BigFloat::from_word(8, FD_BITS), FD_BITS, hp::RM);
        let f = flat_exp_hp(&lam, &pp, &w);
        let d = hp::from_f64(self.delta, FD_BITS);
        hp::to_f64(&d.mul(&d, FD_BITS, hp::RM).mul(&f, FD_BITS, hp::RM).mul(&f, FD_BITS, hp::RM))
    }
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpRow {
    pub x: f64,
    pub v: f64,
    pub xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpTable {
    pub rows: Vec<BumpRow>,
    /// Number of nonzero values clamped to 0 below the normal range.
    pub clamped: usize,
}

/// Tabulate `(x, v(x), xi(x))` on `n + 1` equispaced points of `[0, 1]`.
pub fn tabulate(b: &Bump, n: usize) -> BumpTable {
    let mut clamped = 0;
    let rows = (0..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            let (v, c1) = b.v_checked(x);
            let (xi, c2) = b.xi_checked(x);
            clamped += c1 as usize + c2 as usize;
            BumpRow { x, v, xi }
        })
        .collect();
    BumpTable { rows, clamped }
}

pub fn write_bump_csv(path: &Path, t: &BumpTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &t.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
