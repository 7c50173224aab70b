//! Single-shooting residuals for symmetric and asymmetric periodic orbits,
//! with sensitivities from the variational equations.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Matrix6, SMatrix};
use num_complex::Complex64;

use super::{CorrectorOptions, OrbitKind, Section};
use crate::dynamics::{PhaseState, SystemParams, COLLISION_RADIUS};
use crate::error::{Error, Result};
use crate::propagation::{
    locate_root, Direction, Dop853, EventFn, RegularizedVariationalSystem, VariationalState, VariationalSystem,
    MIN_EVENT_ADVANCE, REG_VAR_DIM, VAR_DIM,
};
use crate::regularization::{physical_image, reg_field, to_regularized, Branch, RegState};

/// Everything a Newton iteration and the final orbit record need from one
/// shot.
#[derive(Debug, Clone)]
pub(crate) struct Shot {
    pub residual: DVector<f64>,
    /// `∂residual/∂u`.
    pub jacobian: DMatrix<f64>,
    pub c: f64,
    pub grad_c: DVector<f64>,
    /// Half period for symmetric orbits, full period otherwise.
    pub time: f64,
    /// Planar STM from the start to the selected crossing, at fixed time.
    pub stm: Matrix4<f64>,
    pub vstm: Matrix2<f64>,
    pub end: Option<PhaseState>,
    pub r_min: f64,
    pub crossing: usize,
    pub reg_ic: Option<RegState>,
    /// Fictitious time to the selected crossing, for regularized shots.
    pub tau: Option<f64>,
}

pub(crate) fn initial_state(kind: OrbitKind, u: &[f64]) -> PhaseState {
    match kind {
        OrbitKind::Symmetric(section) => section.symmetric_state(u[0], u[1]),
        OrbitKind::Asymmetric => PhaseState::planar(u[0], 0.0, u[1], u[2]),
    }
}

/// `∂s₀/∂u` as a 4×m matrix.
fn unknown_directions(kind: OrbitKind) -> DMatrix<f64> {
    let cols: Vec<usize> = match kind {
        OrbitKind::Symmetric(s) => vec![s.axis_index(), s.perpendicular_velocity_index()],
        OrbitKind::Asymmetric => vec![0, 2, 3],
    };
    DMatrix::from_fn(4, cols.len(), |i, j| f64::from(u8::from(i == cols[j])))
}

pub(crate) fn jacobi_gradient(params: &SystemParams, s: &PhaseState) -> Result<[f64; 4]> {
    let [ox, oy, _] = params.potential_gradient(s.x, s.y, 0.0)?;
    Ok([2.0 * ox, 2.0 * oy, -2.0 * s.vx, -2.0 * s.vy])
}

pub(crate) fn planar_field(params: &SystemParams, s: &PhaseState) -> Result<[f64; 4]> {
    let r = params.eom(s)?;
    Ok([r.dx, r.dy, r.dvx, r.dvy])
}

/// Crossing bookkeeping shared by the physical and regularized shooters.
struct CrossingPicker {
    wanted: usize,
    hint: Option<f64>,
    found: Vec<(f64, usize, Vec<f64>)>,
}

impl CrossingPicker {
    fn limit(&self, max_time: f64) -> f64 {
        match self.hint {
            Some(h) => (1.6 * h).max(h + 1.0).min(max_time),
            None => max_time,
        }
    }

    /// Records a crossing at physical time `t`; returns true when the search
    /// can stop.
    fn push(&mut self, t: f64, y: Vec<f64>) -> bool {
        let n = self.found.len() + 1;
        self.found.push((t, n, y));
        match self.hint {
            Some(h) => t >= h,
            None => n >= self.wanted,
        }
    }

    fn pick(mut self, t_stop: f64) -> Result<(f64, usize, Vec<f64>)> {
        match self.hint {
            Some(h) => {
                let best = self
                    .found
                    .into_iter()
                    .min_by(|a, b| (a.0 - h).abs().total_cmp(&(b.0 - h).abs()))
                    .ok_or(Error::EventNotFound(t_stop))?;
                Ok(best)
            }
            None => {
                if self.found.len() >= self.wanted {
                    Ok(self.found.swap_remove(self.wanted - 1))
                } else {
                    Err(Error::EventNotFound(t_stop))
                }
            }
        }
    }
}

pub(crate) fn shoot(
    params: &SystemParams,
    kind: OrbitKind,
    u: &[f64],
    opts: &CorrectorOptions,
    regularized: bool,
) -> Result<Shot> {
    if regularized {
        match kind {
            OrbitKind::Symmetric(section) => shoot_symmetric_regularized(params, section, u, opts),
            OrbitKind::Asymmetric => {
                Err(Error::Degenerate("asymmetric orbits are corrected in physical coordinates only"))
            }
        }
    } else {
        shoot_physical(params, kind, u, opts)
    }
}

fn shoot_physical(params: &SystemParams, kind: OrbitKind, u: &[f64], opts: &CorrectorOptions) -> Result<Shot> {
    let s0 = initial_state(kind, u);
    let c = params.jacobi_constant(&s0)?;
    let escape = if opts.allow_regularized { opts.regularize_below } else { COLLISION_RADIUS };
    let sys = VariationalSystem { params: *params, escape_radius: escape };
    let mut ig = Dop853::new(&sys, &opts.integrator, 0.0, VariationalState::identity(s0).pack(), 1.0)?;

    let (event_index, direction) = match kind {
        OrbitKind::Symmetric(section) => (section.event_index(), Direction::Either),
        OrbitKind::Asymmetric => (1, if s0.vy >= 0.0 { Direction::Increasing } else { Direction::Decreasing }),
    };
    let g = move |y: &[f64; VAR_DIM]| y[event_index];
    let mut picker = CrossingPicker { wanted: opts.crossings, hint: opts.time_hint, found: Vec::new() };
    let t_max = picker.limit(opts.max_time);
    let mut r_min = s0.radius();
    let mut g_old = g(&ig.y);
    let mut done = false;
    while !done && ig.t < t_max {
        ig.step(t_max)?;
        r_min = r_min.min(ig.y[0].hypot(ig.y[1]));
        let g_new = g(&ig.y);
        let crossed = match direction {
            Direction::Increasing => g_old < 0.0 && g_new >= 0.0,
            Direction::Decreasing => g_old > 0.0 && g_new <= 0.0,
            Direction::Either => (g_old < 0.0 && g_new >= 0.0) || (g_old > 0.0 && g_new <= 0.0),
        };
        if crossed {
            let seg = ig.dense()?;
            let (te, ye) = locate_root(&sys, &seg, &g, g_old, g_new)?;
            if te > MIN_EVENT_ADVANCE {
                done = picker.push(te, ye.to_vec());
            }
        }
        g_old = g_new;
    }
    let (te, crossing, ye) = picker.pick(t_max)?;
    let ye: [f64; VAR_DIM] = ye.try_into().expect("variational state size");
    let v = VariationalState::unpack(te, &ye);
    let f = planar_field(params, &v.base)?;
    let dirs = unknown_directions(kind);
    let phi = DMatrix::from_fn(4, 4, |i, j| v.stm[(i, j)]);
    let phi_u = &phi * &dirs;
    let m = dirs.ncols();
    let dt = DVector::from_fn(m, |j, _| -phi_u[(event_index, j)] / f[event_index]);
    let grad = jacobi_gradient(params, &s0)?;
    let grad_c = dirs.transpose() * DVector::from_row_slice(&grad);

    let (residual, jacobian) = match kind {
        OrbitKind::Symmetric(section) => {
            let ri = section.residual_index();
            let res = DVector::from_element(1, v.base.planar_array()[ri]);
            let jac = DMatrix::from_fn(1, m, |_, j| phi_u[(ri, j)] + f[ri] * dt[j]);
            (res, jac)
        }
        OrbitKind::Asymmetric => {
            let e = v.base.planar_array();
            let res = DVector::from_row_slice(&[e[0] - s0.x, e[2] - s0.vx]);
            let jac = DMatrix::from_fn(2, m, |i, j| {
                let row = [0, 2][i];
                phi_u[(row, j)] + f[row] * dt[j] - dirs[(row, j)]
            });
            (res, jac)
        }
    };
    Ok(Shot {
        residual,
        jacobian,
        c,
        grad_c,
        time: te,
        stm: v.stm,
        vstm: v.vstm,
        end: Some(v.base),
        r_min,
        crossing,
        reg_ic: None,
        tau: None,
    })
}

/// `∂(x, y, ẋ, ẏ)/∂(Q₁, Q₂, P₁, P₂)` by complex-step differentiation.
pub(crate) fn physical_jacobian(y: [f64; 4]) -> Matrix4<f64> {
    const H: f64 = 1e-40;
    let mut j = Matrix4::zeros();
    for k in 0..4 {
        let z: [Complex64; 4] = std::array::from_fn(|i| Complex64::new(y[i], if i == k { H } else { 0.0 }));
        let img = physical_image(z);
        for i in 0..4 {
            j[(i, k)] = img[i].im / H;
        }
    }
    j
}

fn shoot_symmetric_regularized(
    params: &SystemParams,
    section: Section,
    u: &[f64],
    opts: &CorrectorOptions,
) -> Result<Shot> {
    let kind = OrbitKind::Symmetric(section);
    let s0 = initial_state(kind, u);
    let r0 = to_regularized(params, &s0, Branch::Plus)?;
    let qp0 = [r0.q1, r0.q2, r0.p1, r0.p2];
    let j0 = physical_jacobian(qp0);
    let j0_inv = j0.try_inverse().ok_or(Error::Degenerate("regularizing map is singular"))?;
    let grad = jacobi_gradient(params, &s0)?;
    // ∂Y₀/∂s₀ for Y = (Q₁, Q₂, P₁, P₂, t, C).
    let dy_ds = SMatrix::<f64, 6, 4>::from_fn(|i, j| match i {
        0..=3 => j0_inv[(i, j)],
        4 => 0.0,
        _ => grad[j],
    });
    let dirs = unknown_directions(kind);
    let dirs4 = SMatrix::<f64, 4, 2>::from_fn(|i, j| dirs[(i, j)]);
    let dy_du = dy_ds * dirs4;

    let sys = RegularizedVariationalSystem { params: *params };
    let mut y0 = [0.0; REG_VAR_DIM];
    y0[..6].copy_from_slice(&[r0.q1, r0.q2, r0.p1, r0.p2, 0.0, r0.c]);
    for i in 0..6 {
        y0[6 + 7 * i] = 1.0;
    }
    y0[42] = 1.0;
    y0[45] = 1.0;
    let mut ig = Dop853::new(&sys, &opts.integrator, 0.0, y0, 1.0)?;
    let g: EventFn<REG_VAR_DIM> = match section {
        Section::XAxis => Box::new(|y| y[0] * y[1]),
        Section::YAxis => Box::new(|y| y[0] * y[0] - y[1] * y[1]),
    };
    let mut picker = CrossingPicker { wanted: opts.crossings, hint: opts.time_hint, found: Vec::new() };
    let t_max = picker.limit(opts.max_time);
    let mut r_min = s0.radius();
    let mut g_old = g(&ig.y);
    let mut done = false;
    while !done && ig.y[4] < t_max {
        ig.step(f64::MAX)?;
        r_min = r_min.min(ig.y[0] * ig.y[0] + ig.y[1] * ig.y[1]);
        let g_new = g(&ig.y);
        if (g_old < 0.0 && g_new >= 0.0) || (g_old > 0.0 && g_new <= 0.0) {
            let seg = ig.dense()?;
            let (tau_e, ye) = locate_root(&sys, &seg, &*g, g_old, g_new)?;
            if ye[4] > MIN_EVENT_ADVANCE {
                let mut rec = ye.to_vec();
                rec.push(tau_e);
                done = picker.push(ye[4], rec);
            }
        }
        g_old = g_new;
    }
    let (te, crossing, rec) = picker.pick(t_max)?;
    let tau = rec[REG_VAR_DIM];
    let y: [f64; REG_VAR_DIM] = rec[..REG_VAR_DIM].try_into().expect("regularized state size");
    let base: [f64; 6] = std::array::from_fn(|i| y[i]);
    let f6 = reg_field(params, base);
    let phi6 = Matrix6::from_fn(|i, j| y[6 + 6 * i + j]);
    let grad_g: [f64; 6] = match section {
        Section::XAxis => [y[1], y[0], 0.0, 0.0, 0.0, 0.0],
        Section::YAxis => [2.0 * y[0], -2.0 * y[1], 0.0, 0.0, 0.0, 0.0],
    };
    let gf: f64 = (0..6).map(|i| grad_g[i] * f6[i]).sum();
    let phi_u = phi6 * dy_du;
    let dtau: [f64; 2] = std::array::from_fn(|j| -(0..6).map(|i| grad_g[i] * phi_u[(i, j)]).sum::<f64>() / gf);
    let (q1, q2, p1, p2) = (y[0], y[1], y[2], y[3]);
    // Perpendicularity of the crossing, written without the 1/‖Q‖² factor.
    let grad_r: [f64; 6] = match section {
        Section::XAxis => [p1, -p2, q1, -q2, 0.0, 0.0],
        Section::YAxis => [p2, p1, q2, q1, 0.0, 0.0],
    };
    let res = match section {
        Section::XAxis => q1 * p1 - q2 * p2,
        Section::YAxis => q2 * p1 + q1 * p2,
    };
    let jac = DMatrix::from_fn(1, 2, |_, j| (0..6).map(|i| grad_r[i] * (phi_u[(i, j)] + f6[i] * dtau[j])).sum());

    // Physical fixed-time STM at the crossing.
    let qp = [q1, q2, p1, p2];
    let end = (q1 * q1 + q2 * q2 > 0.0).then(|| PhaseState::from_planar_array(physical_image(qp)));
    let stm = match &end {
        Some(e) => {
            let j_end = physical_jacobian(qp);
            let f_end = planar_field(params, e)?;
            let d = phi6 * dy_ds;
            let top = SMatrix::<f64, 4, 4>::from_fn(|i, j| d[(i, j)]);
            let moved = j_end * top;
            Matrix4::from_fn(|i, j| moved[(i, j)] - f_end[i] * d[(4, j)])
        }
        None => Matrix4::from_element(f64::NAN),
    };
    let vstm = Matrix2::new(y[42], y[43], y[44], y[45]);
    Ok(Shot {
        residual: DVector::from_element(1, res),
        jacobian: jac,
        c: r0.c,
        grad_c: DVector::from_row_slice(&[grad[section.axis_index()], grad[section.perpendicular_velocity_index()]]),
        time: te,
        stm,
        vstm,
        end,
        r_min,
        crossing,
        reg_ic: Some(r0),
        tau: Some(tau),
    })
}
