//! Numerical laboratory for the destruction of invariant circles in twist maps
//! by Gevrey perturbations, and for the counterterm-free Lindstedt/tree
//! machinery that controls circles with Brjuno-type rotation numbers.
//!
//! Modules, bottom-up:
//!
//! * [`cf`]: continued fractions, the super-exponential rotation number
//!   schedule, certified nearest-integer distances and Diophantine scans.
//! * [`gevrey`]: flat exponentials, Cauchy derivative bounds, Gevrey norms and
//!   the localized bumps used to destroy circles.
//! * [`twist`]: generating functions, the induced cylinder maps and the cover
//!   rescaling.
//! * [`aubry`]: minimal periodic and heteroclinic configurations and the
//!   Peierls barrier.
//! * [`lindstedt`]: Lindstedt coefficients of the invariant circle and their
//!   residual, radius and growth diagnostics.
//! * [`trees`]: the tree expansion of the Lindstedt coefficients with
//!   multiscale cutoffs, clusters and resonances.
//! * [`renorm`]: resonance families, localization and the cancellation of
//!   localized resonance factors.

pub mod aubry;
pub mod cf;
mod error;
pub mod gevrey;
pub mod hp;
pub mod lindstedt;
pub mod renorm;
pub mod trees;
pub mod twist;

pub use error::{Error, Result};

/// Closed interval of binary64 values, used for outward-rounded enclosures.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Point value widened by `ulps` units in the last place on each side.
    pub fn around(x: f64, ulps: u32) -> Self {
        let (mut lo, mut hi) = (x, x);
        for _ in 0..ulps {
            lo = lo.next_down();
            hi = hi.next_up();
        }
        Interval { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Widen outward by a relative amount plus a few ulps.
    pub fn widen_rel(&self, rel: f64) -> Self {
        let lo = self.lo - rel * self.lo.abs();
        let hi = self.hi + rel * self.hi.abs();
        Interval { lo: lo.next_down(), hi: hi.next_up() }
    }
}

/// Three-valued outcome of a comparison made on enclosures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    True,
    False,
    Undecidable,
}

impl Decision {
    pub fn from_bounds(certainly: bool, certainly_not: bool) -> Self {
        match (certainly, certainly_not) {
            (true, _) => Decision::True,
            (false, true) => Decision::False,
            _ => Decision::Undecidable,
        }
    }
}
