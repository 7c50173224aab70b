//! Equations of motion of the Hill four-body problem in rotated synodic
//! coordinates.
//!
//! After the rotation that diagonalizes the quadratic part of the limiting
//! Hamiltonian, the motion of the massless particle obeys
//!
//! ```text
//! x'' - 2 y' = Ω_x,    y'' + 2 x' = Ω_y,    z'' = Ω_z,
//! Ω = ½ (λ₂ x² + λ₁ y² − z²) + 1/r,
//! ```
//!
//! with `λ₁ = 3/2 (1 − d)`, `λ₂ = 3/2 (1 + d)` and `d = √(1 − 3μ + 3μ²)`.
//! Setting `μ = 0` recovers the classical lunar Hill problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius below which the potential is treated as singular.
pub const COLLISION_RADIUS: f64 = 1e-12;

/// Mass parameter and the coefficients derived from it.
///
/// Every derived field is evaluated once, in [`SystemParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mu: f64,
    pub d: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Coefficient of `x²` in the rotated Hamiltonian, `(1 − λ₂)/2`.
    pub a: f64,
    /// Coefficient of `y²` in the rotated Hamiltonian, `(1 − λ₁)/2`.
    pub b: f64,
    /// Coefficient of `z²` in the rotated Hamiltonian.
    pub c: f64,
}

impl SystemParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&mu) {
            return Err(Error::MassOutOfRange(mu));
        }
        let d = (1.0 - 3.0 * mu + 3.0 * mu * mu).sqrt();
        let lambda1 = 1.5 * (1.0 - d);
        let lambda2 = 1.5 * (1.0 + d);
        Ok(Self { mu, d, lambda1, lambda2, a: 0.5 * (1.0 - lambda2), b: 0.5 * (1.0 - lambda1), c: 0.5 })
    }

    /// The classical Hill problem (`μ = 0`).
    pub fn hill() -> Self {
        Self::new(0.0).expect("mu = 0 is in range")
    }

    /// `Ω = ½(λ₂x² + λ₁y² − z²) + 1/r`.
    pub fn effective_potential(&self, s: &PhaseState) -> Result<f64> {
        let r = guarded_radius(s.x, s.y, s.z)?;
        Ok(0.5 * (self.lambda2 * s.x * s.x + self.lambda1 * s.y * s.y - s.z * s.z) + 1.0 / r)
    }

    /// Gradient `(Ω_x, Ω_y, Ω_z)` of the effective potential.
    pub fn potential_gradient(&self, x: f64, y: f64, z: f64) -> Result<[f64; 3]> {
        let r = guarded_radius(x, y, z)?;
        let r3 = 1.0 / (r * r * r);
        Ok([self.lambda2 * x - x * r3, self.lambda1 * y - y * r3, -z - z * r3])
    }

    /// Planar second partials `(Ω_xx, Ω_xy, Ω_yy)` on `z = 0`.
    pub fn potential_hessian(&self, x: f64, y: f64) -> Result<[f64; 3]> {
        let r = guarded_radius(x, y, 0.0)?;
        let r2 = r * r;
        let r3 = 1.0 / (r2 * r);
        let r5 = r3 / r2;
        Ok([self.lambda2 - r3 + 3.0 * x * x * r5, 3.0 * x * y * r5, self.lambda1 - r3 + 3.0 * y * y * r5])
    }

    /// `Ω_zz` evaluated on the plane `z = 0`.
    pub fn omega_zz(&self, x: f64, y: f64) -> Result<f64> {
        let r = guarded_radius(x, y, 0.0)?;
        Ok(-1.0 - 1.0 / (r * r * r))
    }

    /// Vector field of the spatial equations of motion.
    pub fn eom(&self, s: &PhaseState) -> Result<StateRate> {
        let [ox, oy, oz] = self.potential_gradient(s.x, s.y, s.z)?;
        Ok(StateRate { dx: s.vx, dy: s.vy, dz: s.vz, dvx: 2.0 * s.vy + ox, dvy: -2.0 * s.vx + oy, dvz: oz })
    }

    /// Jacobi constant `C = 2Ω − |v|²`.
    pub fn jacobi_constant(&self, s: &PhaseState) -> Result<f64> {
        Ok(2.0 * self.effective_potential(s)? - s.speed_squared())
    }

    /// Value of the rotated Hamiltonian. On any state, `H = −C/2`.
    pub fn hamiltonian(&self, h: &HamiltonianState) -> Result<f64> {
        let r = guarded_radius(h.x, h.y, h.z)?;
        Ok(0.5 * (h.px * h.px + h.py * h.py + h.pz * h.pz) + h.y * h.px - h.x * h.py
            + self.a * h.x * h.x
            + self.b * h.y * h.y
            + self.c * h.z * h.z
            - 1.0 / r)
    }

    /// Splits the planar Hamiltonian into the classical Hill part, the
    /// leading perturbation `P = 9/8 (x² − y²)` and the remainder
    /// `H − H_Hill − μP`, which is of second order in `μ`.
    pub fn hill_perturbation_split(&self, h: &HamiltonianState) -> Result<HillSplit> {
        let planar = HamiltonianState { z: 0.0, pz: 0.0, ..*h };
        let full = self.hamiltonian(&planar)?;
        let hill = Self::hill().hamiltonian(&planar)?;
        let perturbation = 9.0 / 8.0 * (h.x * h.x - h.y * h.y);
        Ok(HillSplit { hill, perturbation, residual: full - hill - self.mu * perturbation })
    }
}

fn guarded_radius(x: f64, y: f64, z: f64) -> Result<f64> {
    let r = (x * x + y * y + z * z).sqrt();
    if r < COLLISION_RADIUS || !r.is_finite() {
        Err(Error::Collision { r })
    } else {
        Ok(r)
    }
}

/// Position and velocity in the rotated synodic frame. Planar states have
/// `z = vz = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl PhaseState {
    pub fn planar(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, z: 0.0, vx, vy, vz: 0.0 }
    }

    pub fn from_planar_array(s: [f64; 4]) -> Self {
        Self::planar(s[0], s[1], s[2], s[3])
    }

    /// `(x, y, vx, vy)`.
    pub fn planar_array(&self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn speed_squared(&self) -> f64 {
        self.vx * self.vx + self.vy * self.vy + self.vz * self.vz
    }

    pub fn is_planar(&self) -> bool {
        self.z == 0.0 && self.vz == 0.0
    }

    pub fn to_hamiltonian(&self) -> HamiltonianState {
        HamiltonianState { x: self.x, y: self.y, z: self.z, px: self.vx - self.y, py: self.vy + self.x, pz: self.vz }
    }
}

/// Time derivative of a [`PhaseState`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateRate {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dvx: f64,
    pub dvy: f64,
    pub dvz: f64,
}

/// Position and canonical momenta; `px = vx − y`, `py = vy + x`, `pz = vz`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl HamiltonianState {
    pub fn to_phase(&self) -> PhaseState {
        PhaseState { x: self.x, y: self.y, z: self.z, vx: self.px + self.y, vy: self.py - self.x, vz: self.pz }
    }
}

impl From<PhaseState> for HamiltonianState {
    fn from(s: PhaseState) -> Self {
        s.to_hamiltonian()
    }
}

impl From<HamiltonianState> for PhaseState {
    fn from(h: HamiltonianState) -> Self {
        h.to_phase()
    }
}

/// Result of [`SystemParams::hill_perturbation_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillSplit {
    pub hill: f64,
    pub perturbation: f64,
    pub residual: f64,
}

/// Discrete symmetries of the planar equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    /// Reflection in the x-axis with time reversal:
    /// `(x, y, ẋ, ẏ, t) → (x, −y, −ẋ, ẏ, −t)`.
    XAxis,
    /// Reflection in the y-axis with time reversal:
    /// `(x, y, ẋ, ẏ, t) → (−x, y, ẋ, −ẏ, −t)`.
    YAxis,
    /// Point reflection through the origin, time preserved.
    Origin,
}

impl Symmetry {
    pub fn reverses_time(self) -> bool {
        !matches!(self, Symmetry::Origin)
    }

    /// Maps a planar state; the boolean reports whether time is reversed.
    pub fn apply(self, s: &PhaseState) -> (PhaseState, bool) {
        let mapped = match self {
            Symmetry::XAxis => PhaseState::planar(s.x, -s.y, -s.vx, s.vy),
            Symmetry::YAxis => PhaseState::planar(-s.x, s.y, s.vx, -s.vy),
            Symmetry::Origin => PhaseState::planar(-s.x, -s.y, -s.vx, -s.vy),
        };
        (mapped, self.reverses_time())
    }
}

/// Free-function form of [`Symmetry::apply`].
pub fn apply_symmetry(which: Symmetry, s: &PhaseState) -> (PhaseState, bool) {
    which.apply(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_limits() {
        let p = SystemParams::new(0.0).unwrap();
        assert_eq!(p.d, 1.0);
        assert_eq!(p.lambda2, 3.0);
        assert_eq!(p.lambda1, 0.0);

        let p = SystemParams::new(0.5).unwrap();
        assert!((p.d - 0.5).abs() < 1e-15);
        assert!((p.lambda2 - 2.25).abs() < 1e-15);
        assert!((p.lambda1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn params_sun_jupiter() {
        // Reference digits from a 50-digit evaluation of the closed forms.
        let p = SystemParams::new(0.00095).unwrap();
        assert!((p.d - 0.998_575_338_920_404).abs() < 1e-14, "{}", p.d);
        assert!((p.lambda2 - 2.997_863_008_380_606).abs() < 1e-14);
        assert!((p.lambda1 - 0.002_136_991_619_394).abs() < 1e-14);
    }

    #[test]
    fn params_reject_out_of_range() {
        assert_eq!(SystemParams::new(-1e-9), Err(Error::MassOutOfRange(-1e-9)));
        assert!(SystemParams::new(0.5 + 1e-12).is_err());
        assert!(SystemParams::new(f64::NAN).is_err());
    }

    #[test]
    fn potential_examples() {
        let hill = SystemParams::hill();
        let s = PhaseState::planar(1.0, 0.0, 0.0, 0.0);
        assert_eq!(hill.effective_potential(&s).unwrap(), 2.5);

        for mu in [0.0, 0.1, 0.5] {
            let p = SystemParams::new(mu).unwrap();
            let s = PhaseState { z: 1.0, ..Default::default() };
            assert_eq!(p.effective_potential(&s).unwrap(), 0.5);
        }
    }

    #[test]
    fn collision_is_an_error() {
        let p = SystemParams::new(0.01).unwrap();
        let s = PhaseState::default();
        assert!(matches!(p.effective_potential(&s), Err(Error::Collision { .. })));
        assert!(matches!(p.eom(&s), Err(Error::Collision { .. })));
        assert!(matches!(p.jacobi_constant(&s), Err(Error::Collision { .. })));
    }

    #[test]
    fn eom_on_y_axis_at_hill_limit() {
        let hill = SystemParams::hill();
        let y0 = 0.7;
        let rate = hill.eom(&PhaseState::planar(0.0, y0, 0.0, 0.0)).unwrap();
        assert_eq!(rate.dvx, 0.0);
        assert!((rate.dvy + 1.0 / (y0 * y0)).abs() < 1e-15);
    }

    #[test]
    fn jacobi_decreases_with_speed() {
        let p = SystemParams::new(0.2).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let v = k as f64 * 10.0;
            let c = p.jacobi_constant(&PhaseState::planar(0.3, -0.4, v, 0.5 * v)).unwrap();
            assert!(c < last);
            last = c;
        }
    }

    #[test]
    fn hamiltonian_is_minus_half_jacobi() {
        let p = SystemParams::new(0.3).unwrap();
        let s = PhaseState { x: 0.4, y: -0.2, z: 0.1, vx: 0.3, vy: 1.1, vz: -0.2 };
        let c = p.jacobi_constant(&s).unwrap();
        let h = p.hamiltonian(&s.to_hamiltonian()).unwrap();
        assert!((h + 0.5 * c).abs() < 1e-14);
    }

    #[test]
    fn momentum_round_trip() {
        let s = PhaseState { x: 0.4, y: -0.2, z: 0.1, vx: 0.3, vy: 1.1, vz: -0.2 };
        let back = PhaseState::from(HamiltonianState::from(s));
        assert_eq!(back, s);
    }

    #[test]
    fn symmetries() {
        let s = PhaseState::planar(0.3, 0.2, -0.5, 0.9);
        for sym in [Symmetry::XAxis, Symmetry::YAxis, Symmetry::Origin] {
            let (once, _) = sym.apply(&s);
            let (twice, _) = sym.apply(&once);
            assert_eq!(twice, s);
        }
        let (o, rev) = apply_symmetry(Symmetry::Origin, &s);
        assert_eq!(o, PhaseState::planar(-0.3, -0.2, 0.5, -0.9));
        assert!(!rev);
        assert!(Symmetry::XAxis.reverses_time() && Symmetry::YAxis.reverses_time());
    }

    #[test]
    fn perturbation_split() {
        let hill = SystemParams::hill();
        let h = PhaseState::planar(0.4, 0.3, 0.1, -0.7).to_hamiltonian();
        assert_eq!(hill.hill_perturbation_split(&h).unwrap().residual, 0.0);

        let diag = PhaseState::planar(1.0, 1.0, 0.0, 0.0).to_hamiltonian();
        let p = SystemParams::new(0.01).unwrap();
        assert_eq!(p.hill_perturbation_split(&diag).unwrap().perturbation, 0.0);

        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&mu| {
                let p = SystemParams::new(mu).unwrap();
                p.hill_perturbation_split(&h).unwrap().residual / (mu * mu)
            })
            .collect();
        let spread = (ratios[0] - ratios[2]).abs().max((ratios[1] - ratios[2]).abs());
        assert!(spread / ratios[2].abs() < 0.05, "{ratios:?}");
    }
}
