//! Horizontal and vertical stability indices from the monodromy matrices.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::shooting::{jacobi_gradient, planar_field};
use super::Section;
use crate::dynamics::{PhaseState, SystemParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityIndices {
    /// `a + d` of the energy-reduced 2×2 return map.
    pub ah: f64,
    /// Trace of the vertical 2×2 monodromy.
    pub av: f64,
    pub half_a: f64,
    pub half_d: f64,
    /// Relative residual of the trivial unit pair: the flow vector must be a
    /// right eigenvector and the Jacobi gradient a left eigenvector of the
    /// monodromy, both for the multiplier 1.
    pub unit_pair_error: f64,
}

impl StabilityIndices {
    pub fn horizontally_stable(&self) -> bool {
        self.ah.abs() < 2.0
    }

    pub fn vertically_stable(&self) -> bool {
        self.av.abs() < 2.0
    }

    pub fn bistable(&self) -> bool {
        self.horizontally_stable() && self.vertically_stable()
    }
}

/// 2×2 return map on the section through `ic` at fixed Jacobi constant, in
/// the section coordinates (position along the axis, velocity along the
/// axis). The remaining velocity component is eliminated through `δC = 0`
/// and the return-time variation through the section condition.
pub fn reduced_return_map(
    params: &SystemParams,
    ic: &PhaseState,
    section: Section,
    monodromy: &Matrix4<f64>,
) -> Result<Matrix2<f64>> {
    let f = planar_field(params, ic)?;
    let grad_c = jacobi_gradient(params, ic)?;
    let ev = section.event_index();
    if f[ev] == 0.0 {
        return Err(Error::Degenerate("flow is tangent to the section"));
    }
    let mut psi = *monodromy;
    for j in 0..4 {
        let gm = monodromy[(ev, j)];
        for i in 0..4 {
            psi[(i, j)] -= f[i] * gm / f[ev];
        }
    }
    let (p, w, e) = section.reduced_indices();
    if grad_c[e] == 0.0 {
        return Err(Error::Degenerate("energy constraint cannot be solved for the normal velocity"));
    }
    let col = |j: usize| -> [f64; 2] {
        let k = -grad_c[j] / grad_c[e];
        [psi[(p, j)] + psi[(p, e)] * k, psi[(w, j)] + psi[(w, e)] * k]
    };
    let (c0, c1) = (col(p), col(w));
    Ok(Matrix2::new(c0[0], c1[0], c0[1], c1[1]))
}

/// Monodromy of a symmetric orbit from the STM over its half period, using
/// the reversing symmetry of the section.
pub fn symmetric_monodromy(section: Section, half: &Matrix4<f64>) -> Option<Matrix4<f64>> {
    let r = section.reversor();
    Some(r * symplectic_inverse(half) * r * half)
}

/// Inverse of a planar STM through the symplectic identity `Φ⁻¹ = −JΦᵀJ`
/// in canonical momenta `p = v + (−y, x)`, which avoids the cancellation of
/// a numerical inverse on strongly unstable arcs.
pub fn symplectic_inverse(stm: &Matrix4<f64>) -> Matrix4<f64> {
    #[rustfmt::skip]
    let t = Matrix4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, -1.0, 1.0, 0.0,
        1.0, 0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let t_inv = Matrix4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 1.0, 1.0, 0.0,
        -1.0, 0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let j = Matrix4::new(
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 0.0,
    );
    let canonical = t * stm * t_inv;
    t_inv * (-j * canonical.transpose() * j) * t
}

/// Vertical counterpart of [`symmetric_monodromy`]; the reversor flips `δż`.
pub fn symmetric_vertical_monodromy(half: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let r = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    // A 2×2 matrix of unit determinant inverts to its adjugate.
    let inv = Matrix2::new(half[(1, 1)], -half[(0, 1)], -half[(1, 0)], half[(0, 0)]);
    Some(r * inv * r * half)
}

pub fn multipliers(monodromy: &Matrix4<f64>) -> [Complex64; 4] {
    let ev = monodromy.complex_eigenvalues();
    [ev[0], ev[1], ev[2], ev[3]]
}

pub fn indices(
    params: &SystemParams,
    ic: &PhaseState,
    section: Section,
    monodromy: &Matrix4<f64>,
    vertical: &Matrix2<f64>,
) -> Result<StabilityIndices> {
    let m2 = reduced_return_map(params, ic, section, monodromy)?;
    // Eigenvalues of the defective unit pair are only resolved to about
    // sqrt(eps‖M‖), so the pair is measured through its known eigenvectors.
    let f = Vector4::from(planar_field(params, ic)?);
    let g = Vector4::from(jacobi_gradient(params, ic)?);
    let right = (monodromy * f - f).norm() / f.norm();
    let left = (monodromy.transpose() * g - g).norm() / g.norm();
    Ok(StabilityIndices {
        ah: m2.trace(),
        av: vertical.trace(),
        half_a: m2[(0, 0)],
        half_d: m2[(1, 1)],
        unit_pair_error: right.max(left),
    })
}
