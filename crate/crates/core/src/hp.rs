//! Arbitrary-precision helpers built on `astro-float`.
//!
//! Used for certified floors of large exponentials in the rotation number
//! schedule and as the high-precision scalar of the Lindstedt residual.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as BSign};
use num_traits::Zero;

use crate::{Error, Result};

pub const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

/// Run `f` with the thread-local constant cache.
pub fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

pub fn from_f64(x: f64, p: usize) -> BigFloat {
    BigFloat::from_f64(x, p)
}

/// Exact conversion of a big unsigned integer.
pub fn from_biguint(q: &BigUint, p: usize) -> BigFloat {
    if q.is_zero() {
        return BigFloat::from_word(0, p);
    }
    let d = q.to_u64_digits();
    let mut x = BigFloat::from_words(&d, Sign::Pos, (64 * d.len()) as i32);
    if p > 64 * d.len() {
        x.set_precision(p, RM).expect("precision");
    }
    x
}

pub fn from_bigint(q: &BigInt, p: usize) -> BigFloat {
    let x = from_biguint(q.magnitude(), p);
    if q.sign() == BSign::Minus {
        x.neg()
    } else {
        x
    }
}

/// Binary exponent `e` with `|x|` in `[2^(e-1), 2^e)`; `None` for zero or non-finite values.
pub fn exponent(x: &BigFloat) -> Option<i64> {
    if x.is_zero() || x.is_nan() || x.is_inf() {
        return None;
    }
    x.exponent().map(|e| e as i64)
}

fn mantissa(x: &BigFloat) -> Option<(BigUint, i64, bool)> {
    let (m, _n, s, e, _) = x.as_raw_parts()?;
    let digits: Vec<u32> = m.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
    let mm = BigUint::from_slice(&digits);
    Some((mm, e as i64 - 64 * m.len() as i64, s == Sign::Neg))
}

/// `floor(x)` for finite non-negative `x`.
pub fn floor_biguint(x: &BigFloat) -> Option<BigUint> {
    if x.is_nan() || x.is_inf() || x.is_negative() {
        return None;
    }
    if x.is_zero() {
        return Some(BigUint::zero());
    }
    let (mm, sh, _) = mantissa(x)?;
    Some(if sh >= 0 { mm << sh as usize } else { mm >> (-sh) as usize })
}

/// Nearest binary64 value (ties and truncation below 2^-128 relative are ignored).
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf() {
        return if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    if x.is_zero() {
        return 0.0;
    }
    let (m, _n, s, e, _) = x.as_raw_parts().expect("finite");
    let top = m[m.len() - 1] as u128;
    let next = if m.len() >= 2 { m[m.len() - 2] as u128 } else { 0 };
    let v = ((top << 64) | next) as f64;
    let y = ldexp(v, e as i64 - 128);
    if s == Sign::Neg {
        -y
    } else {
        y
    }
}

/// `x * 2^k` without intermediate overflow for moderate `k`.
pub fn ldexp(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(k as i32)
}

/// Natural logarithm of a positive big integer, rounded to binary64.
pub fn ln_biguint(q: &BigUint) -> f64 {
    let p = 192;
    let x = from_biguint(q, p.max(64 * q.to_u64_digits().len()));
    with_consts(|cc| to_f64(&x.ln(p, RM, cc)))
}

/// `b * q^beta` at precision `p`.
pub fn scaled_power(b: f64, beta: f64, q: &BigUint, p: usize) -> BigFloat {
    let qf = from_biguint(q, p);
    let pw = if beta == 0.5 {
        qf.sqrt(p, RM)
    } else {
        with_consts(|cc| qf.pow(&from_f64(beta, p), p, RM, cc))
    };
    pw.mul(&from_f64(b, p), p, RM)
}

/// Certified `floor(exp(b * q^beta))`, with the binary64 parameters taken as exact.
///
/// Precision is raised until the fractional part is separated from the
/// nearest integer by a margin well above the accumulated rounding error.
pub fn floor_exp_certified(b: f64, beta: f64, q: &BigUint) -> Result<BigUint> {
    let x_est = b * (q.bits() as f64 * std::f64::consts::LN_2 * beta).exp();
    if !x_est.is_finite() {
        return Err(Error::PrecisionExhausted("exponent argument overflows".into()));
    }
    let int_bits = (x_est / std::f64::consts::LN_2).ceil() as usize + 2;
    let mut p = int_bits + 128 + 2 * (x_est.max(2.0).log2().ceil() as usize) + 64 * q.to_u64_digits().len();
    for _ in 0..4 {
        let x = scaled_power(b, beta, q, p);
        let e = with_consts(|cc| x.exp(p, RM, cc));
        let fl = floor_biguint(&e).ok_or_else(|| Error::PrecisionExhausted("exp not finite".into()))?;
        let frac = e.sub(&from_biguint(&fl, p), p, RM);
        let one = BigFloat::from_word(1, p);
        let other = one.sub(&frac, p, RM);
        let d = if frac.cmp(&other).unwrap_or(0) < 0 { frac } else { other };
        let err_bits = exponent(&e).unwrap_or(0) - p as i64 + (to_f64(&x).max(2.0).log2().ceil() as i64) + 12;
        match exponent(&d) {
            Some(ed) if ed - 1 > err_bits => return Ok(fl),
            _ => p *= 2,
        }
    }
    Err(Error::PrecisionExhausted("floor of exponential could not be certified".into()))
}
