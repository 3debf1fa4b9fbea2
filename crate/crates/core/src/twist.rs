//! Twist maps of the cylinder from generating functions
//! `h(x, x') = (x - x')^2 / 2 + V(x')`.
//!
//! The map is `(x, y) -> (x', y')` with `y = -d1 h(x, x')`, `y' = d2 h(x, x')`,
//! that is `x' = x + y`, `y' = y + V'(x + y)`. The potential is the single
//! source of truth for both the dynamics and the variational action.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gevrey::Bump;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `V = 0`.
    Integrable,
    /// `V = delta (1 - cos 2 pi x)`.
    Hyperbolic,
    /// Hyperbolic potential plus a bump `xi`.
    HyperbolicBump,
    /// `V = (delta / q^2)(1 - cos 2 pi q x)`, plus `xi(q x) / q^2` if a bump is present.
    Rescaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingFamily {
    pub kind: FamilyKind,
    pub delta: f64,
    pub qcover: u64,
    pub bump: Option<Bump>,
}

impl GeneratingFamily {
    pub fn integrable() -> Self {
        GeneratingFamily { kind: FamilyKind::Integrable, delta: 0.0, qcover: 1, bump: None }
    }

    pub fn hyperbolic(delta: f64) -> Self {
        GeneratingFamily { kind: FamilyKind::Hyperbolic, delta, qcover: 1, bump: None }
    }

    pub fn hyperbolic_bump(delta: f64, bump: Bump) -> Self {
        GeneratingFamily { kind: FamilyKind::HyperbolicBump, delta, qcover: 1, bump: Some(bump) }
    }

    pub fn rescaled(delta: f64, q: u64, bump: Option<Bump>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("cover degree q must be positive".into()));
        }
        Ok(GeneratingFamily { kind: FamilyKind::Rescaled, delta, qcover: q, bump })
    }

    /// Rescaled family whose map kick is `eps sin(2 pi q x)`.
    pub fn with_kick_amplitude(eps: f64, q: u64) -> Result<Self> {
        Self::rescaled(eps * q as f64 / (2.0 * PI), q, None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta = {} must be non-negative", self.delta)));
        }
        if self.kind == FamilyKind::HyperbolicBump && self.bump.is_none() {
            return Err(Error::InvalidArgument("bump family needs a bump".into()));
        }
        if self.kind == FamilyKind::Integrable && (self.delta != 0.0 || self.bump.is_some()) {
            return Err(Error::InvalidArgument("integrable family has no potential".into()));
        }
        Ok(())
    }

    pub fn is_integrable(&self) -> bool {
        self.kind == FamilyKind::Integrable || (self.delta == 0.0 && self.bump.is_none())
    }

    fn q(&self) -> f64 {
        match self.kind {
            FamilyKind::Rescaled => self.qcover as f64,
            _ => 1.0,
        }
    }

    /// Potential `V(x)`.
    pub fn v(&self, x: f64) -> f64 {
        let q = self.q();
        let y = q * x;
        let mut r = self.delta * (1.0 - (2.0 * PI * y).cos());
        if let Some(b) = &self.bump {
            r += b.xi(y);
        }
        r / (q * q)
    }

    /// `V'(x)`.
    pub fn v1(&self, x: f64) -> f64 {
        let q = self.q();
        let y = q * x;
        let mut r = 2.0 * PI * self.delta * (2.0 * PI * y).sin();
        if let Some(b) = &self.bump {
            r += b.xi_d1(y);
        }
        r / q
    }

    /// `V''(x)`.
    pub fn v2(&self, x: f64) -> f64 {
        let q = self.q();
        let y = q * x;
        let mut r = 4.0 * PI * PI * self.delta * (2.0 * PI * y).cos();
        if let Some(b) = &self.bump {
            r += b.xi_d2(y);
        }
        r
    }

    /// Width `Delta = sqrt(delta)` of the hyperbolic part.
    pub fn width(&self) -> f64 {
        self.delta.sqrt()
    }

    pub fn h(&self, x: f64, xp: f64) -> f64 {
        0.5 * (x - xp) * (x - xp) + self.v(xp)
    }

    pub fn d1h(&self, x: f64, xp: f64) -> f64 {
        x - xp
    }

    pub fn d2h(&self, x: f64, xp: f64) -> f64 {
        xp - x + self.v1(xp)
    }

    /// Mixed derivative; the twist condition is `d12h < 0`.
    pub fn d12h(&self, _x: f64, _xp: f64) -> f64 {
        -1.0
    }
}

/// The cylinder map generated by a family, with an optional fault in the kick.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMap {
    pub family: GeneratingFamily,
    /// Constant added to `V'` in the update rule only, for fault injection.
    pub kick_offset: f64,
}

impl CylinderMap {
    pub fn new(family: GeneratingFamily) -> Self {
        CylinderMap { family, kick_offset: 0.0 }
    }

    pub fn with_kick_offset(family: GeneratingFamily, offset: f64) -> Self {
        CylinderMap { family, kick_offset: offset }
    }

    pub fn step(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let xp = x + y;
        (xp, y + self.family.v1(xp) + self.kick_offset)
    }

    /// Jacobian `[[1, 1], [c, 1 + c]]` with `c = V''(x + y)`.
    pub fn jacobian(&self, (x, y): (f64, f64)) -> [[f64; 2]; 2] {
        let c = self.family.v2(x + y);
        [[1.0, 1.0], [c, 1.0 + c]]
    }

    pub fn orbit(&self, z0: (f64, f64), steps: usize) -> Vec<OrbitPoint> {
        let mut z = z0;
        let mut out = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            out.push(OrbitPoint { k, x: z.0, y: z.1, x_mod1: z.0 - z.0.floor() });
            z = self.step(z);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitPoint {
    pub k: usize,
    pub x: f64,
    pub y: f64,
    pub x_mod1: f64,
}

pub fn write_orbit_csv(path: &Path, orbit: &[OrbitPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in orbit {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymplecticReport {
    pub samples: usize,
    /// `max |y + d1 h(x, x')|`.
    pub max_residual_y: f64,
    /// `max |y' - d2 h(x, x')|`.
    pub max_residual_yp: f64,
    /// `max |det DG - 1|`.
    pub max_det_error: f64,
    pub pass: bool,
    /// First sample violating the tolerance.
    pub witness: Option<(f64, f64)>,
}

/// Check that the map is the exact symplectic map generated by `h` on the samples.
pub fn check_exact_symplectic(map: &CylinderMap, samples: &[(f64, f64)], tol: f64) -> SymplecticReport {
    let f = &map.family;
    let mut rep = SymplecticReport { samples: samples.len(), max_residual_y: 0.0, max_residual_yp: 0.0, max_det_error: 0.0, pass: true, witness: None };
    for &(x, y) in samples {
        let (xp, yp) = map.step((x, y));
        let ry = (y + f.d1h(x, xp)).abs();
        let ryp = (yp - f.d2h(x, xp)).abs();
        let j = map.jacobian((x, y));
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let rd = (det - 1.0).abs();
        rep.max_residual_y = rep.max_residual_y.max(ry);
        rep.max_residual_yp = rep.max_residual_yp.max(ryp);
        rep.max_det_error = rep.max_det_error.max(rd);
        if (ry > tol || ryp > tol || rd > tol) && rep.witness.is_none() {
            rep.pass = false;
            rep.witness = Some((x, y));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_map_is_a_shear() {
        let m = CylinderMap::new(GeneratingFamily::integrable());
        assert_eq!(m.step((0.25, 0.5)), (0.75, 0.5));
    }

    #[test]
    fn hyperbolic_fixed_point_at_origin() {
        let m = CylinderMap::new(GeneratingFamily::hyperbolic(0.1));
        assert_eq!(m.step((0.0, 0.0)), (0.0, 0.0));
        let j = m.jacobian((0.0, 0.0));
        let tr = j[0][0] + j[1][1];
        assert!(tr > 2.0);
    }

    #[test]
    fn rescaled_requires_positive_cover() {
        assert!(GeneratingFamily::rescaled(0.1, 0, None).is_err());
    }

    #[test]
    fn kick_amplitude_family() {
        let f = GeneratingFamily::with_kick_amplitude(0.3, 2).unwrap();
        let x = 0.137;
        assert!((f.v1(x) - 0.3 * (2.0 * PI * 2.0 * x).sin()).abs() < 1e-15);
    }
}
