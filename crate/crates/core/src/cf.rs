//! Continued fractions and Diophantine tools for the super-exponential
//! rotation number
//!
//! ```text
//! omega_bar = [0; a_1, a_2, ...],   a_{n+1} = floor(exp(b q_n^beta)),
//! ```
//!
//! with convergents `p_n/q_n` under the convention `q_{-1} = 0, q_0 = 1,
//! p_{-1} = 1, p_0 = a_0`.
//!
//! Levels whose quotient stays below a digit budget are exact big integers.
//! Past the budget only `ln q_n` is tracked, as an outward-rounded interval
//! (a "shadow" level). Rotation numbers are enclosed by dyadic intervals
//! derived from exact convergents, so every nearest-integer distance and every
//! threshold comparison is decided by integer arithmetic or reported as
//! undecidable.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::hp;
use crate::{Decision, Error, Interval, Result};

/// Default budget (decimal digits of a single quotient) for exact levels.
pub const DEFAULT_DIGIT_BUDGET: u64 = 100_000;

/// Default precision of rotation number enclosures, in bits.
pub const DEFAULT_BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergents {
    pub p: Vec<BigInt>,
    pub q: Vec<BigInt>,
}

/// Convergents `p_n/q_n` of `[a_0; a_1, ..., a_N]`.
pub fn convergents(a: &[BigInt]) -> Result<Convergents> {
    if a.is_empty() {
        return Err(Error::NoQuotients);
    }
    if let Some(i) = a.iter().skip(1).position(|x| !x.is_positive()) {
        return Err(Error::InvalidQuotient(i + 1));
    }
    let mut p = Vec::with_capacity(a.len());
    let mut q = Vec::with_capacity(a.len());
    let (mut p2, mut q2) = (BigInt::one(), BigInt::zero());
    let (mut p1, mut q1) = (a[0].clone(), BigInt::one());
    p.push(p1.clone());
    q.push(q1.clone());
    for an in &a[1..] {
        let pn = an * &p1 + &p2;
        let qn = an * &q1 + &q2;
        p2 = std::mem::replace(&mut p1, pn.clone());
        q2 = std::mem::replace(&mut q1, qn.clone());
        p.push(pn);
        q.push(qn);
    }
    Ok(Convergents { p, q })
}

/// Parameters of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Explicit prefix of partial quotients; the unknown tail is only assumed to be `>= 1`.
    Explicit,
    /// The golden mean `[0; 1, 1, ...]`; the tail is known.
    Golden,
    OmegaBar { b: f64, beta: f64, digit_budget: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub n: usize,
    pub a: Option<BigInt>,
    pub p: Option<BigInt>,
    pub q: Option<BigInt>,
    /// Enclosure of `ln q_n`.
    pub lnq: Interval,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub levels: Vec<Level>,
}

fn exact_level(n: usize, a: BigInt, p: BigInt, q: BigInt) -> Level {
    let l = hp::ln_biguint(q.magnitude());
    Level { n, a: Some(a), p: Some(p), q: Some(q), lnq: Interval::around(l, 2), exact: true }
}

impl Schedule {
    /// Schedule from explicit quotients `[a_0, a_1, ..., a_N]`.
    pub fn explicit(a: &[BigInt]) -> Result<Self> {
        Self::from_quotients(a, ScheduleKind::Explicit)
    }

    /// The golden mean with levels `0..=levels`.
    pub fn golden(levels: usize) -> Self {
        let mut a = vec![BigInt::zero()];
        a.extend(std::iter::repeat_n(BigInt::one(), levels));
        Self::from_quotients(&a, ScheduleKind::Golden).expect("valid quotients")
    }

    fn from_quotients(a: &[BigInt], kind: ScheduleKind) -> Result<Self> {
        let c = convergents(a)?;
        let levels = (0..a.len()).map(|n| exact_level(n, a[n].clone(), c.p[n].clone(), c.q[n].clone())).collect();
        Ok(Schedule { kind, levels })
    }

    /// Index of the last level.
    pub fn last(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Option<&Level> {
        self.levels.get(n)
    }

    /// Exact `q_n`.
    pub fn q(&self, n: usize) -> Result<&BigInt> {
        self.levels.get(n).and_then(|l| l.q.as_ref()).ok_or(Error::ExactLevelRequired(n))
    }

    pub fn p(&self, n: usize) -> Result<&BigInt> {
        self.levels.get(n).and_then(|l| l.p.as_ref()).ok_or(Error::ExactLevelRequired(n))
    }

    /// Exact `q_n` as `u64` when it fits.
    pub fn q_u64(&self, n: usize) -> Result<u64> {
        self.q(n)?.to_u64().ok_or(Error::ExactLevelRequired(n))
    }

    pub fn lnq(&self, n: usize) -> Option<Interval> {
        self.levels.get(n).map(|l| l.lnq)
    }

    /// Number of leading exact levels.
    pub fn exact_levels(&self) -> usize {
        self.levels.iter().take_while(|l| l.exact).count()
    }

    /// Rigorous lower bound on `ln q_{n+1}`, also past the last stored level.
    pub fn lnq_next_lower(&self, n: usize) -> Option<f64> {
        if let Some(l) = self.levels.get(n + 1) {
            return Some(l.lnq.lo);
        }
        let ln = self.levels.get(n)?;
        match &self.kind {
            ScheduleKind::Explicit | ScheduleKind::Golden => {
                // a_{n+1} >= 1 gives q_{n+1} >= q_n + q_{n-1} > q_n.
                Some(ln.lnq.lo)
            }
            ScheduleKind::OmegaBar { b, beta, .. } => {
                let x = b * (beta * ln.lnq.lo).exp();
                let lo = x + (-(-x).exp()).ln_1p() + ln.lnq.lo;
                Some(lo - 1e-15 * lo.abs())
            }
        }
    }

    /// JSON form: decimal strings for exact levels, `null` plus an inexact
    /// `lnq` entry for shadow levels.
    pub fn to_json(&self) -> serde_json::Value {
        let a: Vec<_> = self.levels.iter().map(|l| l.a.as_ref().map(|x| x.to_string())).collect();
        let q: Vec<_> = self.levels.iter().map(|l| l.q.as_ref().map(|x| x.to_string())).collect();
        let lnq: Vec<_> = self
            .levels
            .iter()
            .map(|l| json!({"value": l.lnq.mid(), "lo": l.lnq.lo, "hi": l.lnq.hi, "exact": l.exact}))
            .collect();
        json!({"a": a, "q": q, "lnq": lnq, "params": self.kind})
    }
}

/// `omega_bar` schedule with levels `0..=levels`; errors with the last valid
/// level if the log-space shadow overflows first.
pub fn build_omega_bar(b: f64, beta: f64, levels: usize) -> Result<Schedule> {
    build_omega_bar_with(b, beta, levels, DEFAULT_DIGIT_BUDGET)
}

pub fn build_omega_bar_with(b: f64, beta: f64, levels: usize, digit_budget: u64) -> Result<Schedule> {
    let s = omega_bar_up_to(b, beta, levels, digit_budget)?;
    if s.last() < levels {
        return Err(Error::ScheduleOverflow { last_valid: s.last() });
    }
    Ok(s)
}

/// Like [`build_omega_bar_with`] but stops quietly at the last representable level.
pub fn omega_bar_up_to(b: f64, beta: f64, levels: usize, digit_budget: u64) -> Result<Schedule> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("b = {b} must be positive")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must lie in (0, 1)")));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let kind = ScheduleKind::OmegaBar { b, beta, digit_budget };
    let mut out = vec![exact_level(0, BigInt::zero(), BigInt::zero(), BigInt::one())];
    let (mut p2, mut q2) = (BigInt::one(), BigInt::zero());
    for n in 0..levels {
        let cur = &out[n];
        if cur.exact {
            let qn = cur.q.clone().unwrap();
            let x_est = b * (beta * cur.lnq.mid()).exp();
            let digits = x_est / std::f64::consts::LN_10;
            if digits <= digit_budget as f64 {
                let a = BigInt::from(hp::floor_exp_certified(b, beta, qn.magnitude())?);
                let pn = cur.p.clone().unwrap();
                let p_next = &a * &pn + &p2;
                let q_next = &a * &qn + &q2;
                p2 = pn;
                q2 = qn;
                out.push(exact_level(n + 1, a, p_next, q_next));
                continue;
            }
        }
        // Log-space shadow: ln a in [X + ln(1 - e^-X), X], q_{n+1} in [a q_n, (a+1) q_n].
        let lnq = cur.lnq;
        let x_lo = b * (beta * lnq.lo).exp();
        let x_hi = b * (beta * lnq.hi).exp();
        let lo = x_lo + (-(-x_lo).exp()).ln_1p() + lnq.lo;
        let hi = x_hi + (-x_hi).exp().ln_1p() + lnq.hi;
        if !(lo.is_finite() && hi.is_finite()) {
            break;
        }
        let iv = Interval::new(lo, hi).widen_rel(4.0 * f64::EPSILON);
        out.push(Level { n: n + 1, a: None, p: None, q: None, lnq: iv, exact: false });
    }
    Ok(Schedule { kind, levels: out })
}

/// Dyadic enclosure `[lo, hi] / 2^bits` of a rotation number.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationValue {
    lo: BigInt,
    hi: BigInt,
    scale: u32,
    /// `floor(-log2(width))`.
    pub precision_bits: u32,
    /// Index `n` of the convergent the enclosure was built from.
    pub level: usize,
}

/// Nearest-integer distance enclosure `[lo, hi] / 2^bits`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist {
    lo: BigInt,
    hi: BigInt,
    scale: u32,
}

pub(crate) fn dyadic_to_f64(num: &BigInt, scale: u32) -> f64 {
    let x = hp::from_bigint(num, 64 * (num.bits() as usize / 64 + 2));
    hp::ldexp(hp::to_f64(&x), -(scale as i64))
}

impl RotationValue {
    /// Golden mean `(sqrt 5 - 1)/2` to at least `bits` bits.
    pub fn golden(bits: u32) -> Self {
        let levels = (0.75 * (bits as f64 + 24.0)) as usize + 8;
        Self::from_schedule(&Schedule::golden(levels), bits).expect("golden enclosure")
    }

    /// Enclosure of the rotation number defined by a schedule.
    ///
    /// Uses `|omega - p_n/q_n| < 1/(q_n q_{n+1})` with the sign `(-1)^n`, at the
    /// smallest level `n >= 1` that reaches the requested precision.
    pub fn from_schedule(s: &Schedule, bits: u32) -> Result<Self> {
        let target = bits as f64 + 8.0;
        let mut best: Option<(usize, f64)> = None;
        for n in 1..s.levels.len() {
            let lv = &s.levels[n];
            if !lv.exact {
                break;
            }
            let Some(next_lo) = s.lnq_next_lower(n) else { break };
            let avail = (lv.lnq.lo + next_lo) / std::f64::consts::LN_2;
            if best.map(|(_, b)| avail > b).unwrap_or(true) {
                best = Some((n, avail));
            }
            if avail >= target {
                break;
            }
        }
        let (n, avail) = best.ok_or_else(|| Error::PrecisionExhausted("no exact convergent with a successor".into()))?;
        let p = s.p(n)?.clone();
        let q = s.q(n)?.clone();
        // Lower bound Q on q_{n+1}, capped so that the numbers stay small.
        let cap = bits as u64 + 32 + q.bits();
        let pow2 = |lnlo: f64| -> BigInt {
            let lb = (lnlo / std::f64::consts::LN_2 - 1e-9).floor().max(0.0) as u64;
            BigInt::one() << lb.min(cap) as usize
        };
        let qnext = match (s.q(n + 1), s.level(n + 1)) {
            (Ok(x), _) if x.bits() <= cap => x.clone(),
            (Ok(_), _) => BigInt::one() << cap as usize,
            (Err(_), Some(l)) => pow2(l.lnq.lo),
            (Err(_), None) => match s.kind {
                ScheduleKind::Explicit | ScheduleKind::Golden => s.q(n)? + s.q(n - 1)?,
                ScheduleKind::OmegaBar { .. } => pow2(s.lnq_next_lower(n).unwrap()),
            },
        };
        let scale = bits + 16;
        let one_s: BigInt = BigInt::one() << scale as usize;
        let den = &q * &qnext;
        // omega in (p/q, p/q + 1/(q Q)) for even n, mirrored for odd n.
        let c_num = &p * &qnext;
        let (lo_num, hi_num) = if n % 2 == 0 { (c_num.clone(), &c_num + 1) } else { (&c_num - 1, c_num.clone()) };
        let lo = (&lo_num * &one_s).div_floor(&den);
        let hi = (&hi_num * &one_s).div_ceil(&den);
        let width = &hi - &lo;
        let prec = (scale as i64 - width.bits() as i64).max(0) as u32;
        let _ = avail;
        Ok(RotationValue { lo, hi, scale, precision_bits: prec, level: n })
    }

    /// Enclosure of an arbitrary binary64 value (exact, zero width); for tests and toy runs.
    pub fn from_f64_exact(x: f64, bits: u32) -> Self {
        let num = if x == 0.0 {
            BigInt::zero()
        } else {
            let xf = hp::from_f64(x.abs(), 64);
            let two_s = hp::from_biguint(&(BigUint::one() << bits as usize), 64);
            let scaled = xf.mul(&two_s, bits as usize + 128, hp::RM);
            let n = BigInt::from(hp::floor_biguint(&scaled).expect("finite"));
            if x < 0.0 {
                -n
            } else {
                n
            }
        };
        RotationValue { lo: num.clone(), hi: num, scale: bits, precision_bits: bits, level: 0 }
    }

    pub fn lo_f64(&self) -> f64 {
        dyadic_to_f64(&self.lo, self.scale).next_down()
    }

    pub fn hi_f64(&self) -> f64 {
        dyadic_to_f64(&self.hi, self.scale).next_up()
    }

    pub fn mid(&self) -> f64 {
        dyadic_to_f64(&((&self.lo + &self.hi) >> 1usize), self.scale)
    }

    /// The enclosure as binary64 interval (outward rounded).
    pub fn interval(&self) -> Interval {
        Interval::new(self.lo_f64(), self.hi_f64())
    }

    /// Dyadic numerators and scale: `omega` lies in `[lo, hi] / 2^scale`.
    pub fn dyadic(&self) -> (&BigInt, &BigInt, u32) {
        (&self.lo, &self.hi, self.scale)
    }

    /// `true` if `other` is contained in `self`.
    pub fn contains(&self, other: &RotationValue) -> bool {
        let s = self.scale.max(other.scale);
        let lift = |x: &BigInt, sc: u32| x << (s - sc) as usize;
        lift(&self.lo, self.scale) <= lift(&other.lo, other.scale) && lift(&other.hi, other.scale) <= lift(&self.hi, self.scale)
    }

    /// `||v omega||`.
    pub fn dist(&self, v: i64) -> Dist {
        self.dist_big(&BigInt::from(v))
    }

    pub fn dist_big(&self, v: &BigInt) -> Dist {
        let (a, b) = if v.sign() == Sign::Minus { (v * &self.hi, v * &self.lo) } else { (v * &self.lo, v * &self.hi) };
        nearest_interval(a, b, self.scale)
    }

    /// Signed representative of `v omega mod 1` in `(-1/2, 1/2]`, binary64 midpoint.
    pub fn frac_signed(&self, v: i64) -> f64 {
        let (r, sc) = self.frac_signed_dyadic(v);
        dyadic_to_f64(&r, sc)
    }

    /// Midpoint of the enclosure as `num / 2^scale`.
    pub fn mid_dyadic(&self) -> (BigInt, u32) {
        ((&self.lo + &self.hi) >> 1usize, self.scale)
    }

    /// [`RotationValue::frac_signed`] as an exact dyadic `num / 2^scale`.
    pub fn frac_signed_dyadic(&self, v: i64) -> (BigInt, u32) {
        let s: BigInt = BigInt::one() << self.scale as usize;
        let m = BigInt::from(v) * self.mid_dyadic().0;
        let mut r = m.mod_floor(&s);
        if &r + &r > s {
            r -= &s;
        }
        (r, self.scale)
    }

    /// `gamma(v) = 2 (cos(2 pi omega v) - 1) = -4 sin^2(pi ||omega v||)`.
    pub fn gamma(&self, v: i64) -> Result<Interval> {
        let d = self.dist(v);
        if d.lo.is_zero() {
            return Err(Error::SingularDivisor(v));
        }
        let f = |x: f64| -4.0 * (std::f64::consts::PI * x).sin().powi(2);
        let lo = f(d.hi_f64().min(0.5));
        let hi = f(d.lo_f64());
        Ok(Interval::new(lo, hi).widen_rel(8.0 * f64::EPSILON))
    }
}

/// `||x||` over `[a, b] / 2^scale`; the function is monotone between integers and half-integers.
fn nearest_interval(a: BigInt, b: BigInt, scale: u32) -> Dist {
    let s: BigInt = BigInt::one() << scale as usize;
    let half: BigInt = &s >> 1usize;
    let width = &b - &a;
    if width >= half {
        return Dist { lo: BigInt::zero(), hi: half, scale };
    }
    let a0 = a.mod_floor(&s);
    let b0 = &a0 + width;
    let d = |y: &BigInt| -> BigInt {
        let r = y.mod_floor(&s);
        let t = &s - &r;
        if r < t {
            r
        } else {
            t
        }
    };
    let (da, db) = (d(&a0), d(&b0));
    let (mut lo, mut hi) = if da <= db { (da, db) } else { (db, da) };
    if a0 <= half && half <= b0 {
        hi = half.clone();
    }
    if a0 <= s && s <= b0 {
        lo = BigInt::zero();
    }
    Dist { lo, hi, scale }
}

impl Dist {
    pub fn lo_f64(&self) -> f64 {
        if self.lo.is_zero() {
            0.0
        } else {
            dyadic_to_f64(&self.lo, self.scale).next_down()
        }
    }

    pub fn hi_f64(&self) -> f64 {
        dyadic_to_f64(&self.hi, self.scale).next_up()
    }

    pub fn mid(&self) -> f64 {
        dyadic_to_f64(&((&self.lo + &self.hi) >> 1usize), self.scale)
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo_f64(), self.hi_f64())
    }

    /// Width of the enclosure as a binary64 upper bound.
    pub fn width(&self) -> f64 {
        dyadic_to_f64(&(&self.hi - &self.lo), self.scale).next_up()
    }

    /// Is `||v omega|| <= c / d`?
    pub fn le_ratio(&self, c: &BigInt, d: &BigInt) -> Decision {
        let rhs = c << self.scale as usize;
        Decision::from_bounds(&self.hi * d <= rhs, &self.lo * d > rhs)
    }

    /// Is `||v omega|| < c / d`?
    pub fn lt_ratio(&self, c: &BigInt, d: &BigInt) -> Decision {
        let rhs = c << self.scale as usize;
        Decision::from_bounds(&self.hi * d < rhs, &self.lo * d >= rhs)
    }

    /// Is `||v omega|| > other`?
    pub fn gt(&self, other: &Dist) -> Decision {
        let s = self.scale.max(other.scale);
        let l = |x: &BigInt, sc: u32| x << (s - sc) as usize;
        Decision::from_bounds(l(&self.lo, self.scale) > l(&other.hi, other.scale), l(&self.hi, self.scale) <= l(&other.lo, other.scale))
    }

    /// `ln ||v omega||` as an interval.
    pub fn ln(&self) -> Interval {
        Interval::new(self.lo_f64().ln(), self.hi_f64().ln())
    }
}

/// `||v omega||`.
pub fn nearest_dist(v: i64, omega: &RotationValue) -> Dist {
    omega.dist(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrjunoVariant {
    /// Terms `ln q_{n+m+1} / q_{n+m}^e`.
    Standard,
    /// Terms `(ln q_{n+m+1} - ln q_{n+m}) / q_{n+m}^e`.
    Differenced,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrjunoReport {
    pub m: usize,
    pub exponent: f64,
    pub variant: BrjunoVariant,
    /// Enclosures of the individual terms.
    pub terms: Vec<Interval>,
    pub partial_sums: Vec<Interval>,
    pub sum: Interval,
    /// Sum divided by the first term.
    pub ratio_to_first: Interval,
}

/// Truncated Brjuno-type sum `sum_{n=0}^{N-1} term(n + m)`, evaluated in log space.
///
/// `n_terms = None` uses every level for which the term is defined.
pub fn brjuno_sum(s: &Schedule, exponent: f64, m: usize, n_terms: Option<usize>, variant: BrjunoVariant) -> Result<BrjunoReport> {
    if exponent <= 0.0 {
        return Err(Error::InvalidArgument("exponent must be positive".into()));
    }
    let avail = s.levels.len().saturating_sub(m + 1);
    let n = n_terms.unwrap_or(avail);
    if n == 0 || n > avail {
        return Err(Error::ExactLevelRequired(m + n));
    }
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let a = s.lnq(i + m).unwrap();
        let b = s.lnq(i + m + 1).unwrap();
        let (num_lo, num_hi) = match variant {
            BrjunoVariant::Standard => (b.lo, b.hi),
            BrjunoVariant::Differenced => ((b.lo - a.hi).max(0.0), b.hi - a.lo),
        };
        let t = |num: f64, lnden: f64| if num <= 0.0 { 0.0 } else { (num.ln() - exponent * lnden).exp() };
        terms.push(Interval::new(t(num_lo, a.hi), t(num_hi, a.lo)).widen_rel(8.0 * f64::EPSILON));
    }
    let mut partial = Vec::with_capacity(n);
    let mut acc = Interval::point(0.0);
    for t in &terms {
        acc = Interval::new(acc.lo + t.lo, acc.hi + t.hi).widen_rel(2.0 * f64::EPSILON);
        partial.push(acc);
    }
    let first = terms[0];
    let ratio = if first.lo > 0.0 { Interval::new(acc.lo / first.hi, acc.hi / first.lo) } else { Interval::new(1.0, f64::INFINITY) };
    Ok(BrjunoReport { m, exponent, variant, terms, partial_sums: partial, sum: acc, ratio_to_first: ratio })
}

/// Parameters of the `n_{q_m}` threshold comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeveParams {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub eps: f64,
}

impl NeveParams {
    /// Threshold parameters matching an `omega_bar` schedule.
    pub fn for_schedule(s: &Schedule, a: f64, eps: f64) -> Result<Self> {
        match s.kind {
            ScheduleKind::OmegaBar { b, beta, .. } => Ok(NeveParams { a, b, beta, eps }),
            _ => Err(Error::InvalidArgument("threshold needs b and beta; pass them explicitly".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeveResult {
    pub m: usize,
    /// Enclosure of `ln ||q_m omega||`.
    pub ln_lhs: Interval,
    /// Enclosure of `-(a/2 + eps) ln n_{q_m}`, `n_{q_m} = floor(exp((b/a) q_m^beta))`.
    pub ln_rhs: Interval,
    pub pass: bool,
}

/// Decide `||q_m omega|| < n_{q_m}^{-a/2-eps}` in log space.
pub fn check_neve(s: &Schedule, p: &NeveParams, m: usize) -> Result<NeveResult> {
    let lq = s.lnq(m).ok_or(Error::ExactLevelRequired(m))?;
    let lq1 = s.lnq(m + 1).ok_or(Error::ExactLevelRequired(m + 1))?;
    // ||q_m omega|| lies in (1/(q_{m+1} + q_m), 1/q_{m+1}) once p_m/q_m is a best approximation.
    let a1_is_one = s.levels.get(1).and_then(|l| l.a.as_ref()).map(|a| a.is_one()).unwrap_or(false);
    let ln_lhs = if m == 0 && a1_is_one {
        let w = RotationValue::from_schedule(s, DEFAULT_BITS)?;
        w.dist(1).ln()
    } else {
        let hi = -lq1.lo;
        let lo = -(lq1.hi + (lq.hi - lq1.lo).exp().ln_1p());
        Interval::new(lo, hi).widen_rel(4.0 * f64::EPSILON)
    };
    let c = p.a / 2.0 + p.eps;
    let x_lo = p.b / p.a * (p.beta * lq.lo).exp();
    let x_hi = p.b / p.a * (p.beta * lq.hi).exp();
    if !x_hi.is_finite() {
        return Err(Error::PrecisionExhausted(format!("threshold exponent overflows at m = {m}")));
    }
    // ln floor(e^X) in [ln max(1, e^X - 1), X].
    let ln_n_lo = if x_lo > 1.0 { x_lo + (-(-x_lo).exp()).ln_1p() } else { 0.0 };
    let ln_rhs = Interval::new(-c * x_hi, -c * ln_n_lo).widen_rel(4.0 * f64::EPSILON);
    if ln_lhs.hi < ln_rhs.lo {
        Ok(NeveResult { m, ln_lhs, ln_rhs, pass: true })
    } else if ln_lhs.lo >= ln_rhs.hi {
        Ok(NeveResult { m, ln_lhs, ln_rhs, pass: false })
    } else {
        Err(Error::PrecisionExhausted(format!("enclosures overlap at m = {m}")))
    }
}

/// Rescale a periodic potential to its `q`-fold cover: `Q(x) = q^-2 P(q x)`.
pub fn rescale_cover<F: Fn(f64) -> f64>(p: F, q: u64) -> Result<impl Fn(f64) -> f64> {
    if q == 0 {
        return Err(Error::InvalidArgument("cover degree q must be positive".into()));
    }
    let qf = q as f64;
    Ok(move |x: f64| p(qf * x) / (qf * qf))
}

/// `kappa(n) = min{k : q_m k >= q_{m+n}} = ceil(q_{m+n} / q_m)`.
pub fn kappa(s: &Schedule, n: usize, m: usize) -> Result<BigInt> {
    let qm = s.q(m)?;
    let qmn = s.q(m + n)?;
    Ok(qmn.div_ceil(qm))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanWitness {
    pub v: i64,
    pub n: usize,
    pub dist: Interval,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScanReport {
    pub checked: u64,
    pub triggered: u64,
    pub counterexamples: Vec<ScanWitness>,
    pub undecidable: Vec<ScanWitness>,
}

impl ScanReport {
    pub fn pass(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn merge(&mut self, o: ScanReport) {
        self.checked += o.checked;
        self.triggered += o.triggered;
        self.counterexamples.extend(o.counterexamples);
        self.undecidable.extend(o.undecidable);
    }
}

/// Brute-force check of the small-divisor property: for `0 < |v| <= vmax` and
/// `0 <= n <= n_max`, `||omega v|| <= 1/(4 q_{n+m})` forces `|v| >= q_{n+m}`,
/// and either `|v| >= q_{n+m+1}/4` or `v` is a multiple of `q_{n+m}`.
pub fn small_divisor_scan(omega: &RotationValue, s: &Schedule, m: usize, n_max: usize, vmax: i64) -> Result<ScanReport> {
    let mut rep = ScanReport::default();
    let qs: Vec<(BigInt, BigInt)> = (0..=n_max).map(|n| Ok((s.q(n + m)?.clone(), s.q(n + m + 1)?.clone()))).collect::<Result<_>>()?;
    let one = BigInt::one();
    for av in 1..=vmax {
        for v in [av, -av] {
            let d = omega.dist(v);
            let bv = BigInt::from(av);
            for (n, (q, q1)) in qs.iter().enumerate() {
                rep.checked += 1;
                match d.le_ratio(&one, &(q * 4)) {
                    Decision::False => {}
                    Decision::Undecidable => rep.undecidable.push(ScanWitness { v, n, dist: d.interval() }),
                    Decision::True => {
                        rep.triggered += 1;
                        let ok = &bv >= q && (&bv * 4 >= *q1 || (&bv % q).is_zero());
                        if !ok {
                            rep.counterexamples.push(ScanWitness { v, n, dist: d.interval() });
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Check `1/(2 q_{n+1}) < ||omega q_n|| < 1/q_{n+1}` for `n_min <= n <= n_max`.
pub fn convergent_bounds_scan(omega: &RotationValue, s: &Schedule, n_min: usize, n_max: usize) -> Result<ScanReport> {
    let mut rep = ScanReport::default();
    let one = BigInt::one();
    for n in n_min..=n_max {
        let q = s.q(n)?;
        let q1 = s.q(n + 1)?;
        let d = omega.dist_big(q);
        rep.checked += 1;
        let upper = d.lt_ratio(&one, q1);
        let lower = d.gt_ratio(&one, &(q1 * 2));
        let vq = q.to_i64().unwrap_or(i64::MAX);
        match (upper, lower) {
            (Decision::True, Decision::True) => {}
            (Decision::False, _) | (_, Decision::False) => rep.counterexamples.push(ScanWitness { v: vq, n, dist: d.interval() }),
            _ => rep.undecidable.push(ScanWitness { v: vq, n, dist: d.interval() }),
        }
    }
    Ok(rep)
}

impl Dist {
    /// Is `||v omega|| > c / d`?
    pub fn gt_ratio(&self, c: &BigInt, d: &BigInt) -> Decision {
        match self.le_ratio(c, d) {
            Decision::True => Decision::False,
            Decision::False => Decision::True,
            Decision::Undecidable => Decision::Undecidable,
        }
    }
}

/// Check the best-approximation property `||omega v|| > ||omega q_n||` for
/// `0 < |v| < q_{n+1}`, `|v| <= vmax`, `v != +-q_n`, `n_min <= n <= n_max`.
pub fn best_approximation_scan(omega: &RotationValue, s: &Schedule, n_min: usize, n_max: usize, vmax: i64) -> Result<ScanReport> {
    let mut rep = ScanReport::default();
    for n in n_min..=n_max {
        let mut sub = ScanReport::default();
        let q = s.q(n)?.clone();
        let q1 = s.q(n + 1)?.clone();
        let dq = omega.dist_big(&q);
        let top = q1.to_i64().map(|x| (x - 1).min(vmax)).unwrap_or(vmax);
        for av in 1..=top {
            if BigInt::from(av) == q {
                continue;
            }
            for v in [av, -av] {
                sub.checked += 1;
                let d = omega.dist(v);
                match d.gt(&dq) {
                    Decision::True => {}
                    Decision::False => sub.counterexamples.push(ScanWitness { v, n, dist: d.interval() }),
                    Decision::Undecidable => sub.undecidable.push(ScanWitness { v, n, dist: d.interval() }),
                }
            }
        }
        rep.merge(sub);
    }
    Ok(rep)
}

/// Outward binary64 enclosure of `ln q_n` for an exact big integer.
pub fn ln_big(q: &BigInt) -> f64 {
    hp::ln_biguint(q.magnitude())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn fibonacci_denominators() {
        let c = convergents(&bi(&[0, 1, 1, 1, 1, 1])).unwrap();
        assert_eq!(c.q, bi(&[1, 1, 2, 3, 5, 8]));
        assert_eq!(c.p, bi(&[0, 1, 1, 2, 3, 5]));
    }

    #[test]
    fn single_quotient() {
        let c = convergents(&bi(&[0, 2])).unwrap();
        assert_eq!((c.p[1].clone(), c.q[1].clone()), (BigInt::from(1), BigInt::from(2)));
        let c = convergents(&bi(&[0, 54])).unwrap();
        assert_eq!(c.q[1], BigInt::from(54));
    }

    #[test]
    fn quotient_errors() {
        assert_eq!(convergents(&[]), Err(Error::NoQuotients));
        assert_eq!(convergents(&bi(&[0, 3, 0])), Err(Error::InvalidQuotient(2)));
        assert_eq!(convergents(&bi(&[0, -1])), Err(Error::InvalidQuotient(1)));
    }

    #[test]
    fn omega_bar_first_quotients() {
        let s = build_omega_bar(4.0, 0.5, 1).unwrap();
        assert_eq!(s.levels[1].a, Some(BigInt::from(54)));
        let t = build_omega_bar(1.0, 0.5, 3).unwrap();
        let a: Vec<_> = t.levels.iter().map(|l| l.a.clone().unwrap()).collect();
        assert_eq!(a, bi(&[0, 2, 4, 20]));
        let q: Vec<_> = t.levels.iter().map(|l| l.q.clone().unwrap()).collect();
        assert_eq!(q, bi(&[1, 2, 9, 182]));
    }

    #[test]
    fn omega_bar_switches_to_shadow_then_overflows() {
        let s = omega_bar_up_to(4.0, 0.5, 10, DEFAULT_DIGIT_BUDGET).unwrap();
        assert_eq!(s.exact_levels(), 3);
        assert!(!s.levels[3].exact);
        assert_eq!(s.last(), 3);
        assert_eq!(build_omega_bar(4.0, 0.5, 10), Err(Error::ScheduleOverflow { last_valid: 3 }));
    }

    #[test]
    fn golden_enclosure_contains_value() {
        let w = RotationValue::golden(256);
        assert!(w.precision_bits >= 256);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        assert!(w.interval().contains(g));
        let d = w.dist(1);
        assert!((d.mid() - (1.0 - g)).abs() < 1e-15);
    }

    #[test]
    fn kappa_requires_exact_levels() {
        let s = omega_bar_up_to(4.0, 0.5, 3, DEFAULT_DIGIT_BUDGET).unwrap();
        assert_eq!(kappa(&s, 1, 1).unwrap(), s.q(2).unwrap().div_ceil(&BigInt::from(54)));
        assert_eq!(kappa(&s, 2, 1), Err(Error::ExactLevelRequired(3)));
    }

    #[test]
    fn rescale_cover_rejects_zero() {
        assert!(rescale_cover(|x: f64| x, 0).is_err());
        let f = rescale_cover(|x: f64| (2.0 * std::f64::consts::PI * x).cos(), 3).unwrap();
        assert!((f(0.1) - (0.6 * std::f64::consts::PI).cos() / 9.0).abs() < 1e-15);
    }
}
