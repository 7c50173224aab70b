//! Levi-Civita regularization of the collision with the tertiary.
//!
//! Positions are squared through `x + iy = (Q₁ + iQ₂)²`, momenta transform as
//! `P = 2A₀ᵀp` with `A₀ = [[Q₁, −Q₂], [Q₂, Q₁]]`, and the fictitious time obeys
//! `dt = 4‖Q‖² dτ`. On the energy level with Jacobi constant `C` the flow is
//! generated by
//!
//! ```text
//! H̄ = ½‖P‖² − 2‖Q‖²(Q₁P₂ − Q₂P₁) + 2‖Q‖² Qᵀ M₂ Q + 2C‖Q‖² − 4,
//! ```
//!
//! where `Qᵀ M₂ Q = (1 − λ₂)x² + (1 − λ₁)y²`. The level `H̄ = 0` contains the
//! physical motion; at `Q = 0` it forces `‖P‖² = 8`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dynamics::{HamiltonianState, PhaseState, SystemParams};
use crate::error::{Error, Result};

/// Which of the two antipodal square roots of the position to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Branch {
    /// `Q₁ ≥ 0`.
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegState {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
    /// Physical time accumulated along the fictitious-time flow.
    pub t_phys: f64,
    /// Jacobi constant of the energy level the state is embedded in.
    pub c: f64,
}

/// `d/dτ` of a [`RegState`]; `dc` is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegRate {
    pub dq1: f64,
    pub dq2: f64,
    pub dp1: f64,
    pub dp2: f64,
    pub dt_phys: f64,
}

impl RegState {
    /// A state passing through the collision at fictitious time zero, with
    /// momentum direction `angle`.
    pub fn collision(c: f64, angle: f64) -> Self {
        let p = 8f64.sqrt();
        RegState { q1: 0.0, q2: 0.0, p1: p * angle.cos(), p2: p * angle.sin(), t_phys: 0.0, c }
    }

    pub fn rho(&self) -> f64 {
        self.q1 * self.q1 + self.q2 * self.q2
    }

    pub fn position(&self) -> [f64; 2] {
        [self.q1 * self.q1 - self.q2 * self.q2, 2.0 * self.q1 * self.q2]
    }

    /// The antipodal representative of the same physical state.
    pub fn antipode(&self) -> Self {
        RegState { q1: -self.q1, q2: -self.q2, p1: -self.p1, p2: -self.p2, ..*self }
    }

    pub fn array(&self) -> [f64; 5] {
        [self.q1, self.q2, self.p1, self.p2, self.t_phys]
    }

    pub fn from_array(y: &[f64; 5], c: f64) -> Self {
        RegState { q1: y[0], q2: y[1], p1: y[2], p2: y[3], t_phys: y[4], c }
    }
}

/// Map a planar physical state into Levi-Civita variables on the level of its
/// own Jacobi constant.
pub fn to_regularized(params: &SystemParams, s: &PhaseState, branch: Branch) -> Result<RegState> {
    if !s.is_planar() {
        return Err(Error::InvalidArgument("regularization applies to planar states".into()));
    }
    let r = s.x.hypot(s.y);
    if r == 0.0 {
        return Err(Error::Degenerate("the origin has no unique regularized preimage"));
    }
    let (mut q1, mut q2) = if s.x >= 0.0 {
        let q1 = (0.5 * (r + s.x)).sqrt();
        (q1, s.y / (2.0 * q1))
    } else {
        let q2 = (0.5 * (r - s.x)).sqrt().copysign(if s.y < 0.0 { -1.0 } else { 1.0 });
        (s.y / (2.0 * q2), q2)
    };
    if branch == Branch::Minus {
        q1 = -q1;
        q2 = -q2;
    }
    let h = HamiltonianState::from(*s);
    Ok(RegState {
        q1,
        q2,
        p1: 2.0 * (q1 * h.px + q2 * h.py),
        p2: 2.0 * (-q2 * h.px + q1 * h.py),
        t_phys: 0.0,
        c: params.jacobi_constant(s)?,
    })
}

/// Physical image of a regularized state, or `None` exactly at the collision
/// where the physical velocity is unbounded.
pub fn from_regularized(r: &RegState) -> Option<PhaseState> {
    let rho = r.rho();
    if rho == 0.0 {
        return None;
    }
    let [x, y] = r.position();
    let px = (r.q1 * r.p1 - r.q2 * r.p2) / (2.0 * rho);
    let py = (r.q2 * r.p1 + r.q1 * r.p2) / (2.0 * rho);
    Some(HamiltonianState { x, y, z: 0.0, px, py, pz: 0.0 }.to_phase())
}

/// Value of the regularized Hamiltonian, zero on the physical level.
pub fn reg_hamiltonian(params: &SystemParams, r: &RegState) -> f64 {
    let rho = r.rho();
    let [x, y] = r.position();
    let l = r.q1 * r.p2 - r.q2 * r.p1;
    let v = (1.0 - params.lambda2) * x * x + (1.0 - params.lambda1) * y * y;
    0.5 * (r.p1 * r.p1 + r.p2 * r.p2) - 2.0 * rho * l + 2.0 * rho * v + 2.0 * r.c * rho - 4.0
}

/// Canonical equations of [`reg_hamiltonian`], plus `dt/dτ = 4‖Q‖²`.
pub fn reg_eom(params: &SystemParams, r: &RegState) -> RegRate {
    let [dq1, dq2, dp1, dp2, dt_phys, _] = reg_field(params, [r.q1, r.q2, r.p1, r.p2, r.t_phys, r.c]);
    RegRate { dq1, dq2, dp1, dp2, dt_phys }
}

/// The regularized vector field on `(Q₁, Q₂, P₁, P₂, t, C)`, with `C` treated
/// as a constant state. Generic so it can be evaluated on complex arguments
/// for complex-step differentiation.
pub(crate) fn reg_field<T>(params: &SystemParams, [q1, q2, p1, p2, _t, c]: [T; 6]) -> [T; 6]
where
    T: Copy + From<f64> + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Neg<Output = T>,
{
    let k = |v: f64| T::from(v);
    let rho = q1 * q1 + q2 * q2;
    let x = q1 * q1 - q2 * q2;
    let y = k(2.0) * q1 * q2;
    let d1 = k(1.0 - params.lambda2);
    let d2 = k(1.0 - params.lambda1);
    let l = q1 * p2 - q2 * p1;
    let v = d1 * x * x + d2 * y * y;
    let dv_dq1 = k(4.0) * (d1 * x * q1 + d2 * y * q2);
    let dv_dq2 = k(4.0) * (d2 * y * q1 - d1 * x * q2);
    let two_rho = k(2.0) * rho;
    let dh_dq1 = k(4.0) * q1 * (v + c - l) - two_rho * p2 + two_rho * dv_dq1;
    let dh_dq2 = k(4.0) * q2 * (v + c - l) + two_rho * p1 + two_rho * dv_dq2;
    [p1 + two_rho * q2, p2 - two_rho * q1, -dh_dq1, -dh_dq2, k(4.0) * rho, k(0.0)]
}

/// Physical `(x, y, ẋ, ẏ)` of `(Q₁, Q₂, P₁, P₂)`, generic for complex-step
/// differentiation. Singular at `Q = 0`.
pub(crate) fn physical_image<T>([q1, q2, p1, p2]: [T; 4]) -> [T; 4]
where
    T: Copy + From<f64> + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let two = T::from(2.0);
    let rho2 = two * (q1 * q1 + q2 * q2);
    let x = q1 * q1 - q2 * q2;
    let y = two * q1 * q2;
    let px = (q1 * p1 - q2 * p2) / rho2;
    let py = (q2 * p1 + q1 * p2) / rho2;
    [x, y, px + y, py - x]
}

/// `Q̇₁² + Q̇₂² − 2Ωʳ` with `Ωʳ = 4‖Q‖²(Ω − C/2)`; zero on the physical level.
pub fn reg_first_integral(params: &SystemParams, r: &RegState) -> f64 {
    let rate = reg_eom(params, r);
    let rho = r.rho();
    let [x, y] = r.position();
    // 4ρΩ with the Kepler term 4ρ/r = 4 written out, so it stays finite at Q = 0.
    let omega_r = 2.0 * rho * (params.lambda2 * x * x + params.lambda1 * y * y) + 4.0 - 2.0 * r.c * rho;
    rate.dq1 * rate.dq1 + rate.dq2 * rate.dq2 - 2.0 * omega_r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sj() -> SystemParams {
        SystemParams::new(0.00095).unwrap()
    }

    fn random_states(n: usize) -> Vec<PhaseState> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        (0..n)
            .map(|_| {
                let r: f64 = rng.random_range(0.05..3.0);
                let th: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                PhaseState::planar(r * th.cos(), r * th.sin(), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            })
            .collect()
    }

    #[test]
    fn simple_preimages() {
        let p = sj();
        let r = to_regularized(&p, &PhaseState::planar(1.0, 0.0, 0.0, 0.0), Branch::Plus).unwrap();
        assert_eq!((r.q1, r.q2), (1.0, 0.0));
        let r = to_regularized(&p, &PhaseState::planar(0.0, 1.0, 0.0, 0.0), Branch::Plus).unwrap();
        let h = 0.5f64.sqrt();
        assert!((r.q1 - h).abs() < 1e-15 && (r.q2 - h).abs() < 1e-15);
        let r = to_regularized(&p, &PhaseState::planar(-1.0, 0.0, 0.0, 0.0), Branch::Plus).unwrap();
        assert_eq!((r.q1, r.q2), (0.0, 1.0));
        assert!(to_regularized(&p, &PhaseState::planar(0.0, 0.0, 1.0, 0.0), Branch::Plus).is_err());
    }

    #[test]
    fn zero_momenta_image() {
        let r = RegState { q1: 1.0, q2: 0.0, p1: 0.0, p2: 0.0, t_phys: 0.0, c: 0.0 };
        let s = from_regularized(&r).unwrap();
        let h = HamiltonianState::from(s);
        assert_eq!((h.x, h.y, h.px, h.py), (1.0, 0.0, 0.0, 0.0));
        assert!(from_regularized(&RegState::collision(3.0, 0.2)).is_none());
    }

    #[test]
    fn round_trip_and_level() {
        let p = sj();
        for s in random_states(100) {
            for branch in [Branch::Plus, Branch::Minus] {
                let r = to_regularized(&p, &s, branch).unwrap();
                let back = from_regularized(&r).unwrap();
                let err =
                    (back.planar_array().iter().zip(s.planar_array())).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-13, "{err}");
                let scale = 1.0 + r.p1.abs().max(r.p2.abs()).powi(2) + r.c.abs();
                assert!(reg_hamiltonian(&p, &r).abs() < 1e-13 * scale);
                assert!(reg_first_integral(&p, &r).abs() < 1e-12 * scale);
                assert!((p.jacobi_constant(&back).unwrap() - r.c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn antipodes_share_physical_state() {
        let p = sj();
        let s = PhaseState::planar(-0.3, 0.2, 0.5, -0.1);
        let a = to_regularized(&p, &s, Branch::Plus).unwrap();
        let b = to_regularized(&p, &s, Branch::Minus).unwrap();
        assert_eq!(b, a.antipode());
        assert_eq!(from_regularized(&a), from_regularized(&b));
    }

    #[test]
    fn vector_field_is_canonical() {
        let p = sj();
        let r = RegState { q1: 0.4, q2: -0.7, p1: 1.3, p2: 0.6, t_phys: 0.0, c: 3.1 };
        let rate = reg_eom(&p, &r);
        let h = 1e-6;
        let diff = |f: &dyn Fn(f64) -> RegState| (reg_hamiltonian(&p, &f(h)) - reg_hamiltonian(&p, &f(-h))) / (2.0 * h);
        assert!((rate.dq1 - diff(&|e| RegState { p1: r.p1 + e, ..r })).abs() < 1e-8);
        assert!((rate.dq2 - diff(&|e| RegState { p2: r.p2 + e, ..r })).abs() < 1e-8);
        assert!((rate.dp1 + diff(&|e| RegState { q1: r.q1 + e, ..r })).abs() < 1e-8);
        assert!((rate.dp2 + diff(&|e| RegState { q2: r.q2 + e, ..r })).abs() < 1e-8);
    }

    #[test]
    fn regular_at_collision() {
        let p = sj();
        let r = RegState::collision(4.2, 0.9);
        assert!(reg_hamiltonian(&p, &r).abs() < 1e-15);
        assert!(reg_first_integral(&p, &r).abs() < 1e-14);
        let rate = reg_eom(&p, &r);
        assert_eq!((rate.dp1, rate.dp2, rate.dt_phys), (0.0, 0.0, 0.0));
        assert!(rate.dq1.is_finite() && rate.dq2.is_finite());
    }

    #[test]
    fn first_integral_detects_off_level_states() {
        let p = sj();
        let s = PhaseState::planar(0.5, 0.1, 0.2, 1.0);
        let r = to_regularized(&p, &s, Branch::Plus).unwrap();
        let off = RegState { p1: r.p1 + 1e-4, ..r };
        let res = reg_first_integral(&p, &off).abs();
        assert!(res > 1e-6 && res < 1e-2, "{res}");
    }

    #[test]
    fn position_velocity_pushforward() {
        let p = sj();
        let s = PhaseState::planar(0.6, -0.4, 0.3, 0.9);
        let r = to_regularized(&p, &s, Branch::Plus).unwrap();
        let rate = reg_eom(&p, &r);
        let rho = r.rho();
        let dx = 2.0 * (r.q1 * rate.dq1 - r.q2 * rate.dq2);
        let dy = 2.0 * (r.q2 * rate.dq1 + r.q1 * rate.dq2);
        assert!((dx - 4.0 * rho * s.vx).abs() < 1e-13);
        assert!((dy - 4.0 * rho * s.vy).abs() < 1e-13);
    }
}
