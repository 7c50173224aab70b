//! Equilibrium points, their linear spectra, and the linear short/long
//! period motions around `L3`.
//!
//! The collinear points `L1 = (λ₂^{-1/3}, 0)` and `L2 = −L1` exist for every
//! mass parameter. The points `L3 = (0, λ₁^{-1/3})` and `L4 = −L3` only exist
//! for `μ > 0`; they are linearly stable up to the critical mass `μ₀`, where
//! the two frequencies collide, and complex-unstable above it.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PhaseState, SystemParams};
use crate::error::{Error, Result};

/// Discriminant magnitude below which the `L3` spectrum counts as degenerate.
const DEGENERATE_DISCRIMINANT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    L1,
    L2,
    L3,
    L4,
}

impl std::fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::L1 => "L1",
            Self::L2 => "L2",
            Self::L3 => "L3",
            Self::L4 => "L4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `±Λ, ±iω`.
    SaddleCenter,
    /// `±iω₁, ±iω₂`.
    CenterCenter,
    /// `±α ± iω` (Krein collision already happened).
    ComplexSaddle,
    /// Repeated eigenvalues.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumInfo {
    pub label: EquilibriumLabel,
    pub position: [f64; 2],
    pub eigenvalues: [Complex64; 4],
    pub classification: Classification,
}

/// Location of one equilibrium, or `None` when it does not exist
/// (`L3`/`L4` at `μ = 0`, where they escape to infinity).
pub fn equilibrium_position(params: &SystemParams, label: EquilibriumLabel) -> Option<[f64; 2]> {
    match label {
        EquilibriumLabel::L1 => Some([params.lambda2.cbrt().recip(), 0.0]),
        EquilibriumLabel::L2 => Some([-params.lambda2.cbrt().recip(), 0.0]),
        EquilibriumLabel::L3 if params.lambda1 > 0.0 => Some([0.0, params.lambda1.cbrt().recip()]),
        EquilibriumLabel::L4 if params.lambda1 > 0.0 => Some([0.0, -params.lambda1.cbrt().recip()]),
        _ => None,
    }
}

/// All equilibria that exist for `params`, each with its spectrum.
pub fn equilibria(params: &SystemParams) -> Vec<EquilibriumInfo> {
    use EquilibriumLabel::*;
    [L1, L2, L3, L4]
        .into_iter()
        .filter_map(|label| {
            let position = equilibrium_position(params, label)?;
            let hessian = params.potential_hessian(position[0], position[1]).ok()?;
            let (eigenvalues, classification) = planar_spectrum(hessian);
            Some(EquilibriumInfo { label, position, eigenvalues, classification })
        })
        .collect()
}

/// Matrix of the linearized planar flow `(ξ, η, ξ̇, η̇)' = A (ξ, η, ξ̇, η̇)`
/// around `point`.
pub fn linearization(params: &SystemParams, point: [f64; 2]) -> Result<Matrix4<f64>> {
    let [oxx, oxy, oyy] = params.potential_hessian(point[0], point[1])?;
    Ok(linear_matrix(oxx, oxy, oyy))
}

pub(crate) fn linear_matrix(oxx: f64, oxy: f64, oyy: f64) -> Matrix4<f64> {
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        oxx, oxy, 0.0, 2.0,
        oxy, oyy, -2.0, 0.0,
    );
    m
}

/// Eigenvalues of the linearization from its characteristic polynomial
/// `s⁴ + (4 − Ω_xx − Ω_yy) s² + (Ω_xx Ω_yy − Ω_xy²) = 0`, which is
/// quadratic in `s²`.
fn planar_spectrum([oxx, oxy, oyy]: [f64; 3]) -> ([Complex64; 4], Classification) {
    let b = 4.0 - oxx - oyy;
    let c = oxx * oyy - oxy * oxy;
    let disc = b * b - 4.0 * c;
    let sq = Complex64::new(disc, 0.0).sqrt();
    let s2_plus = (-b + sq) / 2.0;
    let s2_minus = (-b - sq) / 2.0;
    let r1 = s2_plus.sqrt();
    let r2 = s2_minus.sqrt();
    let eigenvalues = [r1, -r1, r2, -r2];

    let scale = b.abs().max(c.abs().sqrt()).max(1.0);
    let classification = if disc.abs() < DEGENERATE_DISCRIMINANT * scale * scale {
        Classification::Degenerate
    } else if disc < 0.0 {
        Classification::ComplexSaddle
    } else if c < 0.0 {
        Classification::SaddleCenter
    } else if s2_plus.re < 0.0 {
        Classification::CenterCenter
    } else {
        // Two real pairs; does not occur in this model but keep the label honest.
        Classification::SaddleCenter
    };
    (eigenvalues, classification)
}

/// Critical mass at which the `L3`/`L4` frequencies collide:
/// `μ₀ = (225 − √(3(5227 + 2368√21))) / 450`.
pub fn mu_critical() -> f64 {
    (225.0 - (3.0 * (5227.0 + 2368.0 * 21f64.sqrt())).sqrt()) / 450.0
}

/// `A = (3d − 1)/2`.
pub fn coefficient_a(d: f64) -> f64 {
    0.5 * (3.0 * d - 1.0)
}

/// `D = (225d² − 222d + 1)/4`; vanishes at `μ₀`.
pub fn discriminant(d: f64) -> f64 {
    0.25 * (225.0 * d * d - 222.0 * d + 1.0)
}

/// Linear dynamics around `L3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearAnalysis {
    pub a: f64,
    pub d: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub omega_xx: f64,
    pub omega_yy: f64,
    pub omega_xy: f64,
    /// Set at `μ = 0`, where the long-period frequency vanishes.
    pub degenerate: bool,
}

impl LinearAnalysis {
    pub fn short_period(&self) -> f64 {
        2.0 * PI / self.omega2
    }

    pub fn long_period(&self) -> f64 {
        if self.omega1 > 0.0 {
            2.0 * PI / self.omega1
        } else {
            f64::INFINITY
        }
    }

    pub fn ratio(&self) -> f64 {
        self.omega2 / self.omega1
    }
}

/// Frequencies `ω₁ ≤ ω₂` and coupling ratios of the linear motion around
/// `L3`. Fails above the critical mass, where the spectrum is complex.
pub fn frequencies(params: &SystemParams) -> Result<LinearAnalysis> {
    let mu_critical = mu_critical();
    let a = coefficient_a(params.d);
    let mut d = discriminant(params.d);
    if d < 0.0 {
        if d > -DEGENERATE_DISCRIMINANT {
            d = 0.0;
        } else {
            return Err(Error::ComplexSpectrum { mu: params.mu, mu_critical });
        }
    }
    let sd = d.sqrt();
    let omega1 = ((a - sd).max(0.0)).sqrt() / SQRT_2;
    let omega2 = (a + sd).sqrt() / SQRT_2;
    let coupling = |w: f64| 2.0 * w / (params.lambda2 - params.lambda1 + w * w);
    Ok(LinearAnalysis {
        a,
        d,
        omega1,
        omega2,
        alpha1: coupling(omega1),
        alpha2: coupling(omega2),
        omega_xx: params.lambda2 - params.lambda1,
        omega_yy: 3.0 * params.lambda1,
        omega_xy: 0.0,
        degenerate: params.mu == 0.0,
    })
}

/// Mass parameter at which `ω₂/ω₁ = |k|`, in closed form.
pub fn resonant_mu(k: i32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("resonance order must satisfy |k| >= 1".into()));
    }
    let k2 = f64::from(k) * f64::from(k);
    let kk = ((k2 - 1.0) / (k2 + 1.0)).powi(2);
    let s = (84.0 - 3.0 * kk).sqrt();
    let num = 5227.0 + 1184.0 * s - 5.0 * kk * kk - 32.0 * kk * s - 38.0 * kk;
    let den = (kk - 25.0) * (kk - 25.0);
    Ok(0.5 - (num / den).sqrt() / (6.0 * 3f64.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeedKind {
    Short,
    Long,
}

/// Geometry of a linear elliptic motion `ξ = A cos(ωt + φ)` around `L3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    /// Semi-axis along `ξ`.
    pub semi_axis_a: f64,
    /// Semi-axis along `η`.
    pub semi_axis_b: f64,
    pub phase: f64,
    pub eccentricity: f64,
}

/// Initial conditions of a pure short- or long-period linear solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSeed {
    pub kind: SeedKind,
    pub xi0: f64,
    pub eta0: f64,
    pub xidot0: f64,
    pub etadot0: f64,
    pub period: f64,
    pub ellipse: Ellipse,
    /// Seed in global rotated coordinates; it sits on the y-axis and crosses
    /// it perpendicularly.
    pub state: PhaseState,
}

/// Pure short- or long-period linear solution around `L3`, started on the
/// `η`-axis (`ξ₀ = 0`) at offset `eta0` above the equilibrium.
pub fn linear_seed(params: &SystemParams, kind: SeedKind, eta0: f64) -> Result<LinearSeed> {
    if eta0.is_nan() || eta0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("seed amplitude must be positive, got {eta0}")));
    }
    let la = frequencies(params)?;
    let [_, y3] =
        equilibrium_position(params, EquilibriumLabel::L3).ok_or(Error::Degenerate("L3 does not exist at mu = 0"))?;
    let (omega, alpha) = match kind {
        SeedKind::Short => (la.omega2, la.alpha2),
        SeedKind::Long => (la.omega1, la.alpha1),
    };
    if omega <= 0.0 {
        return Err(Error::Degenerate("long-period frequency vanishes"));
    }
    let xi0 = 0.0;
    let xidot0 = omega * alpha * eta0;
    let etadot0 = -omega / alpha * xi0;
    let semi_axis_a = (xi0 * xi0 + alpha * alpha * eta0 * eta0).sqrt();
    let semi_axis_b = (eta0 * eta0 + xi0 * xi0 / (alpha * alpha)).sqrt();
    Ok(LinearSeed {
        kind,
        xi0,
        eta0,
        xidot0,
        etadot0,
        period: 2.0 * PI / omega,
        ellipse: Ellipse {
            semi_axis_a,
            semi_axis_b,
            phase: -(alpha * eta0).atan2(xi0),
            eccentricity: (1.0 - alpha * alpha).sqrt(),
        },
        state: PhaseState::planar(xi0, y3 + eta0, xidot0, etadot0),
    })
}

/// Planar Lyapunov orbit of the linearized flow around `L1`, started on the
/// x-axis at `x = x_L1 + amplitude` with a perpendicular crossing. Returns
/// the state and the linear period.
pub fn lyapunov_seed_l1(params: &SystemParams, amplitude: f64) -> Result<(PhaseState, f64)> {
    let [x1, _] = equilibrium_position(params, EquilibriumLabel::L1).expect("L1 always exists");
    let [oxx, _, oyy] = params.potential_hessian(x1, 0.0)?;
    let b = 4.0 - oxx - oyy;
    let c = oxx * oyy;
    let omega2 = 0.5 * (b + (b * b - 4.0 * c).sqrt());
    let omega = omega2.sqrt();
    let vy0 = -0.5 * (oxx + omega2) * amplitude;
    Ok((PhaseState::planar(x1 + amplitude, 0.0, 0.0, vy0), 2.0 * PI / omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mu: f64) -> SystemParams {
        SystemParams::new(mu).unwrap()
    }

    #[test]
    fn equilibria_at_hill_limit() {
        let eq = equilibria(&p(0.0));
        assert_eq!(eq.len(), 2);
        assert!((eq[0].position[0] - 3f64.cbrt().recip()).abs() < 1e-15);
        assert!((eq[0].position[0] - 0.693_361).abs() < 1e-6);
        assert_eq!(eq[1].position[0], -eq[0].position[0]);
        assert!(equilibrium_position(&p(0.0), EquilibriumLabel::L3).is_none());
    }

    #[test]
    fn l3_sun_jupiter() {
        let eq = equilibria(&p(0.00095));
        let l3 = eq.iter().find(|e| e.label == EquilibriumLabel::L3).unwrap();
        assert!((l3.position[1] - 7.763_646_043_171_215).abs() < 1e-12);
        assert_eq!(l3.classification, Classification::CenterCenter);
        let l4 = eq.iter().find(|e| e.label == EquilibriumLabel::L4).unwrap();
        assert_eq!(l4.position[1], -l3.position[1]);
    }

    #[test]
    fn l3_complex_above_critical_mass() {
        let eq = equilibria(&p(0.2));
        let l3 = eq.iter().find(|e| e.label == EquilibriumLabel::L3).unwrap();
        assert_eq!(l3.classification, Classification::ComplexSaddle);
        for ev in l3.eigenvalues {
            assert!(ev.re.abs() > 1e-6 && ev.im.abs() > 1e-6, "{ev}");
        }
    }

    #[test]
    fn l3_hessian() {
        let params = p(0.004);
        let pos = equilibrium_position(&params, EquilibriumLabel::L3).unwrap();
        let [oxx, oxy, oyy] = params.potential_hessian(pos[0], pos[1]).unwrap();
        assert!((oxx - (params.lambda2 - params.lambda1)).abs() < 1e-12);
        assert!((oyy - 3.0 * params.lambda1).abs() < 1e-12);
        assert_eq!(oxy, 0.0);
    }

    #[test]
    fn x_axis_has_no_cross_partial() {
        let m = linearization(&p(0.1), [0.37, 0.0]).unwrap();
        assert_eq!(m[(2, 1)], 0.0);
        assert_eq!(m[(3, 0)], 0.0);
        assert!(linearization(&p(0.1), [0.0, 0.0]).is_err());
    }

    #[test]
    fn critical_mass() {
        let mu0 = mu_critical();
        assert!((mu0 - 0.011_942).abs() < 5e-7);
        let d = SystemParams::new(mu0).unwrap().d;
        assert!(discriminant(d).abs() < 1e-12);
        let la = frequencies(&p(mu0)).unwrap();
        let w = (la.a / 2.0).sqrt();
        assert!((la.omega1 - w).abs() < 1e-6 && (la.omega2 - w).abs() < 1e-6);
    }

    #[test]
    fn frequencies_sun_jupiter() {
        let la = frequencies(&p(0.00095)).unwrap();
        assert!((la.short_period() - 6.352_714_860_002_165).abs() < 1e-10);
        assert!((la.long_period() - 44.842_239_275_812_21).abs() < 1e-9);
        assert!(la.alpha2 < 1.0 && la.alpha2 > 0.0);
    }

    #[test]
    fn frequencies_errors() {
        assert!(matches!(frequencies(&p(0.05)), Err(Error::ComplexSpectrum { .. })));
        let hill = frequencies(&p(0.0)).unwrap();
        assert!(hill.degenerate);
        assert_eq!(hill.omega1, 0.0);
        assert!(hill.long_period().is_infinite());
    }

    #[test]
    fn resonance_two() {
        let mu2 = resonant_mu(2).unwrap();
        assert!((mu2 - 0.007_733_672_1).abs() < 1e-10);
        let la = frequencies(&p(mu2)).unwrap();
        assert!((la.ratio() - 2.0).abs() < 1e-10);
        assert!((resonant_mu(1).unwrap() - mu_critical()).abs() < 1e-15);
        assert!(resonant_mu(0).is_err());
        assert_eq!(resonant_mu(-3).unwrap(), resonant_mu(3).unwrap());
    }

    #[test]
    fn short_seed_relations() {
        let params = p(0.00095);
        let la = frequencies(&params).unwrap();
        let seed = linear_seed(&params, SeedKind::Short, 1e-3).unwrap();
        assert_eq!(seed.xi0, 0.0);
        assert!((seed.xidot0 - la.omega2 * la.alpha2 * 1e-3).abs() < 1e-18);
        assert_eq!(seed.etadot0, 0.0);
        let e = seed.ellipse;
        assert!((e.semi_axis_a / e.semi_axis_b - la.alpha2).abs() < 1e-14);
        assert!((e.eccentricity - (1.0 - la.alpha2 * la.alpha2).sqrt()).abs() < 1e-15);
        assert!(e.eccentricity < 1.0);
        // Retrograde: moving in +ξ at the top of the ellipse.
        assert!(seed.state.vx > 0.0 && seed.state.y > 7.76);
    }

    #[test]
    fn long_seed_needs_positive_mass() {
        assert!(linear_seed(&p(0.0), SeedKind::Long, 1e-3).is_err());
        assert!(linear_seed(&p(0.001), SeedKind::Long, -1.0).is_err());
        let s = linear_seed(&p(0.001), SeedKind::Long, 1e-3).unwrap();
        assert!(s.period > 40.0);
    }
}
