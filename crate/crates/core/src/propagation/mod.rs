//! Time integration of the physical and regularized flows, their variational
//! equations, and event location on dense output.

mod dop853;
mod tableau;

use nalgebra::{Matrix2, Matrix4, Matrix6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dop853::{locate_root, DenseSegment, Direction, Dop853, OdeSystem};

use crate::dynamics::{PhaseState, SystemParams, COLLISION_RADIUS};
use crate::error::{Error, Result};
use crate::regularization::{reg_field, RegState};

/// Events closer than this to the start of a search are ignored, so a
/// trajectory started on a section does not report its own starting point.
pub const MIN_EVENT_ADVANCE: f64 = 1e-10;

/// Radius below which continuation hands an orbit to the regularized
/// corrector.
pub const REGULARIZATION_RADIUS: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Method {
    /// Dormand-Prince 8(5,3) with seventh-order dense output.
    #[default]
    Dop853,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 2.22e-14,
            abs_tol: 1e-16,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
            method: Method::Dop853,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("integrator tolerances must be positive".into()));
        }
        if self.max_step.is_nan() || self.max_step <= 0.0 || self.max_steps == 0 {
            return Err(Error::InvalidArgument("integrator step limits must be positive".into()));
        }
        Ok(())
    }
}

/// Planar equations of motion on `(x, y, ẋ, ẏ)`.
#[derive(Debug, Clone, Copy)]
pub struct PlanarSystem {
    pub params: SystemParams,
    /// Accepted steps inside this radius abort with [`Error::CloseApproach`].
    pub escape_radius: f64,
}

impl PlanarSystem {
    pub fn new(params: SystemParams) -> Self {
        PlanarSystem { params, escape_radius: COLLISION_RADIUS }
    }
}

fn planar_rhs(params: &SystemParams, y: &[f64]) -> Result<[f64; 4]> {
    let [ox, oy, _] = params.potential_gradient(y[0], y[1], 0.0)?;
    Ok([y[2], y[3], 2.0 * y[3] + ox, -2.0 * y[2] + oy])
}

fn check_escape(escape_radius: f64, t: f64, y: &[f64]) -> Result<()> {
    let r = y[0].hypot(y[1]);
    if r < escape_radius {
        return Err(Error::CloseApproach { t, r, state: [y[0], y[1], y[2], y[3]] });
    }
    Ok(())
}

impl OdeSystem<4> for PlanarSystem {
    fn rhs(&self, _t: f64, y: &[f64; 4], dy: &mut [f64; 4]) -> Result<()> {
        *dy = planar_rhs(&self.params, y)?;
        Ok(())
    }

    fn check(&self, t: f64, y: &[f64; 4]) -> Result<()> {
        check_escape(self.escape_radius, t, y)
    }
}

/// Size of the packed variational state: base, planar STM, vertical STM.
pub const VAR_DIM: usize = 4 + 16 + 4;

/// Planar flow with its 4×4 state-transition matrix and the 2×2 vertical
/// system `δz̈ = Ω_zz δz`, packed as in [`VariationalState::pack`].
#[derive(Debug, Clone, Copy)]
pub struct VariationalSystem {
    pub params: SystemParams,
    pub escape_radius: f64,
}

impl VariationalSystem {
    pub fn new(params: SystemParams) -> Self {
        VariationalSystem { params, escape_radius: COLLISION_RADIUS }
    }
}

impl OdeSystem<VAR_DIM> for VariationalSystem {
    fn rhs(&self, _t: f64, y: &[f64; VAR_DIM], dy: &mut [f64; VAR_DIM]) -> Result<()> {
        let base = planar_rhs(&self.params, y)?;
        dy[..4].copy_from_slice(&base);
        let [oxx, oxy, oyy] = self.params.potential_hessian(y[0], y[1])?;
        let phi = &y[4..20];
        for j in 0..4 {
            let (r0, r1, r2, r3) = (phi[j], phi[4 + j], phi[8 + j], phi[12 + j]);
            dy[4 + j] = r2;
            dy[8 + j] = r3;
            dy[12 + j] = oxx * r0 + oxy * r1 + 2.0 * r3;
            dy[16 + j] = oxy * r0 + oyy * r1 - 2.0 * r2;
        }
        let ozz = self.params.omega_zz(y[0], y[1])?;
        dy[20] = y[22];
        dy[21] = y[23];
        dy[22] = ozz * y[20];
        dy[23] = ozz * y[21];
        Ok(())
    }

    fn check(&self, t: f64, y: &[f64; VAR_DIM]) -> Result<()> {
        check_escape(self.escape_radius, t, y)
    }
}

/// Regularized flow on `(Q₁, Q₂, P₁, P₂, t)` at a fixed Jacobi constant.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedSystem {
    pub params: SystemParams,
    pub c: f64,
}

impl OdeSystem<5> for RegularizedSystem {
    fn rhs(&self, _tau: f64, y: &[f64; 5], dy: &mut [f64; 5]) -> Result<()> {
        let f = reg_field(&self.params, [y[0], y[1], y[2], y[3], y[4], self.c]);
        dy.copy_from_slice(&f[..5]);
        Ok(())
    }
}

/// Size of the packed regularized variational state: `(Q, P, t, C)`, its
/// 6×6 STM, and the vertical 2×2 STM in fictitious time.
pub const REG_VAR_DIM: usize = 6 + 36 + 4;

/// Regularized flow with `C` as a state, so the STM also carries the
/// sensitivity to the energy level. The Jacobian is obtained by complex-step
/// differentiation of the (polynomial) vector field.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedVariationalSystem {
    pub params: SystemParams,
}

impl OdeSystem<REG_VAR_DIM> for RegularizedVariationalSystem {
    fn rhs(&self, _tau: f64, y: &[f64; REG_VAR_DIM], dy: &mut [f64; REG_VAR_DIM]) -> Result<()> {
        let base: [f64; 6] = std::array::from_fn(|i| y[i]);
        let f = reg_field(&self.params, base);
        dy[..6].copy_from_slice(&f);
        const H: f64 = 1e-40;
        for k in 0..6 {
            let z: [Complex64; 6] = std::array::from_fn(|i| Complex64::new(base[i], H * y[6 + 6 * i + k]));
            let fz = reg_field(&self.params, z);
            for i in 0..6 {
                dy[6 + 6 * i + k] = fz[i].im / H;
            }
        }
        let rho = base[0] * base[0] + base[1] * base[1];
        let a = 4.0 * rho;
        let b = -4.0 * rho - 4.0 / (rho * rho);
        dy[42] = a * y[44];
        dy[43] = a * y[45];
        dy[44] = b * y[42];
        dy[45] = b * y[43];
        Ok(())
    }
}

/// Base point with its planar and vertical state-transition matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalState {
    pub t: f64,
    pub base: PhaseState,
    pub stm: Matrix4<f64>,
    pub vstm: Matrix2<f64>,
}

impl VariationalState {
    pub fn identity(base: PhaseState) -> Self {
        VariationalState { t: 0.0, base, stm: Matrix4::identity(), vstm: Matrix2::identity() }
    }

    pub fn pack(&self) -> [f64; VAR_DIM] {
        let mut y = [0.0; VAR_DIM];
        y[..4].copy_from_slice(&self.base.planar_array());
        for i in 0..4 {
            for j in 0..4 {
                y[4 + 4 * i + j] = self.stm[(i, j)];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                y[20 + 2 * i + j] = self.vstm[(i, j)];
            }
        }
        y
    }

    pub fn unpack(t: f64, y: &[f64; VAR_DIM]) -> Self {
        VariationalState {
            t,
            base: PhaseState::planar(y[0], y[1], y[2], y[3]),
            stm: Matrix4::from_fn(|i, j| y[4 + 4 * i + j]),
            vstm: Matrix2::from_fn(|i, j| y[20 + 2 * i + j]),
        }
    }
}

/// Dense-output record of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize, S> {
    sys: S,
    t0: f64,
    y0: [f64; N],
    segments: Vec<DenseSegment<N>>,
}

pub type PlanarTrajectory = Trajectory<4, PlanarSystem>;
pub type RegTrajectory = Trajectory<5, RegularizedSystem>;

impl<const N: usize, S: OdeSystem<N> + Clone> Trajectory<N, S> {
    fn integrate(sys: S, cfg: &IntegratorConfig, t0: f64, y0: [f64; N], t_final: f64) -> Result<Self> {
        cfg.validate()?;
        let mut segments = Vec::new();
        if t_final != t0 {
            let mut ig = Dop853::new(&sys, cfg, t0, y0, t_final - t0)?;
            while (t_final - ig.t) * (t_final - t0).signum() > 0.0 {
                ig.step(t_final)?;
                segments.push(ig.dense()?);
            }
        }
        Ok(Trajectory { sys, t0, y0, segments })
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t0, |s| s.t_new)
    }

    pub fn segments(&self) -> &[DenseSegment<N>] {
        &self.segments
    }

    pub fn final_array(&self) -> [f64; N] {
        self.segments.last().map_or(self.y0, |s| s.eval(s.t_new))
    }

    /// Interpolated state, `None` outside the integrated interval.
    pub fn array_at(&self, t: f64) -> Option<[f64; N]> {
        if t == self.t0 {
            return Some(self.y0);
        }
        let forward = self.t_end() >= self.t0;
        let idx = self.segments.partition_point(|s| if forward { s.t_new < t } else { s.t_new > t });
        let seg = self.segments.get(idx)?;
        seg.contains(t).then(|| seg.eval(t))
    }

    /// First time after `after` (by at least [`MIN_EVENT_ADVANCE`]) at which
    /// `g` changes sign in `direction`.
    pub fn next_event_with(
        &self,
        g: &dyn Fn(&[f64; N]) -> f64,
        direction: Direction,
        after: f64,
    ) -> Result<Option<(f64, [f64; N])>> {
        let sign = if self.t_end() >= self.t0 { 1.0 } else { -1.0 };
        for seg in &self.segments {
            if sign * (seg.t_new - after) <= 0.0 {
                continue;
            }
            let lo = if sign * (seg.t_old - after) < 0.0 { after } else { seg.t_old };
            let g0 = g(&seg.eval(lo));
            let g1 = g(&seg.eval(seg.t_new));
            let accept = match direction {
                Direction::Increasing => g0 < 0.0 && g1 >= 0.0,
                Direction::Decreasing => g0 > 0.0 && g1 <= 0.0,
                Direction::Either => g0 * g1 < 0.0 || (g1 == 0.0 && g0 != 0.0),
            };
            if accept {
                let (te, ye) = dop853::locate_root(&self.sys, seg, g, g(&seg.eval(seg.t_old)), g1)?;
                if sign * (te - after) > MIN_EVENT_ADVANCE {
                    return Ok(Some((te, ye)));
                }
            }
        }
        Ok(None)
    }
}

impl PlanarTrajectory {
    pub fn state_at(&self, t: f64) -> Option<PhaseState> {
        self.array_at(t).map(PhaseState::from_planar_array)
    }

    pub fn final_state(&self) -> PhaseState {
        PhaseState::from_planar_array(self.final_array())
    }

    pub fn params(&self) -> &SystemParams {
        &self.sys.params
    }
}

impl RegTrajectory {
    pub fn reg_state_at(&self, tau: f64) -> Option<RegState> {
        self.array_at(tau).map(|y| RegState::from_array(&y, self.sys.c))
    }

    pub fn final_reg_state(&self) -> RegState {
        RegState::from_array(&self.final_array(), self.sys.c)
    }

    pub fn next_event(&self, event: EventKind, after: f64) -> Result<Option<(f64, RegState)>> {
        let (g, dir): (EventFn<5>, Direction) = match event {
            EventKind::YCross(d) => (Box::new(|y| y[0] * y[1]), d),
            EventKind::XCross(d) => (Box::new(|y| y[0] * y[0] - y[1] * y[1]), d),
            EventKind::RMin(th) => (Box::new(move |y| y[0] * y[0] + y[1] * y[1] - th), Direction::Decreasing),
        };
        Ok(self.next_event_with(&*g, dir, after)?.map(|(t, y)| (t, RegState::from_array(&y, self.sys.c))))
    }
}

/// Section crossings and close approaches that can be located on a
/// trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// `y = 0`.
    YCross(Direction),
    /// `x = 0`.
    XCross(Direction),
    /// `r` falls below the threshold.
    RMin(f64),
}

/// Dense trajectory of the planar flow from `s0` to `t_final`.
pub fn propagate(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    s0: &PhaseState,
    t_final: f64,
) -> Result<PlanarTrajectory> {
    propagate_from(PlanarSystem::new(*params), cfg, s0, t_final)
}

pub fn propagate_from(
    sys: PlanarSystem,
    cfg: &IntegratorConfig,
    s0: &PhaseState,
    t_final: f64,
) -> Result<PlanarTrajectory> {
    if !s0.is_planar() {
        return Err(Error::InvalidArgument("only planar trajectories are propagated".into()));
    }
    sys.params.potential_gradient(s0.x, s0.y, 0.0)?;
    Trajectory::integrate(sys, cfg, 0.0, s0.planar_array(), t_final)
}

/// Scalar event function on an integrator state.
pub(crate) type EventFn<const N: usize> = Box<dyn Fn(&[f64; N]) -> f64>;

/// Locate the next event on a planar trajectory after time `after`.
pub fn next_event(traj: &PlanarTrajectory, event: EventKind, after: f64) -> Result<Option<(f64, PhaseState)>> {
    let (g, dir): (EventFn<4>, Direction) = match event {
        EventKind::YCross(d) => (Box::new(|y| y[1]), d),
        EventKind::XCross(d) => (Box::new(|y| y[0]), d),
        EventKind::RMin(th) => (Box::new(move |y| y[0].hypot(y[1]) - th), Direction::Decreasing),
    };
    Ok(traj.next_event_with(&*g, dir, after)?.map(|(t, y)| (t, PhaseState::from_planar_array(y))))
}

/// Integrate the variational equations from `v0` (at time `v0.t`) to `t_final`.
pub fn propagate_variational(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    v0: &VariationalState,
    t_final: f64,
) -> Result<VariationalState> {
    cfg.validate()?;
    let sys = VariationalSystem::new(*params);
    let mut ig = Dop853::new(&sys, cfg, v0.t, v0.pack(), t_final - v0.t)?;
    ig.run_to(t_final)?;
    Ok(VariationalState::unpack(ig.t, &ig.y))
}

/// Dense trajectory of the regularized flow over fictitious time `tau_final`.
pub fn propagate_regularized(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    r0: &RegState,
    tau_final: f64,
) -> Result<RegTrajectory> {
    let sys = RegularizedSystem { params: *params, c: r0.c };
    Trajectory::integrate(sys, cfg, 0.0, r0.array(), tau_final)
}

#[derive(Debug, Clone, Copy)]
struct SpatialVariational {
    params: SystemParams,
}

impl OdeSystem<42> for SpatialVariational {
    fn rhs(&self, _t: f64, y: &[f64; 42], dy: &mut [f64; 42]) -> Result<()> {
        let p = &self.params;
        let (x, yy, z) = (y[0], y[1], y[2]);
        let [ox, oy, oz] = p.potential_gradient(x, yy, z)?;
        dy[0] = y[3];
        dy[1] = y[4];
        dy[2] = y[5];
        dy[3] = 2.0 * y[4] + ox;
        dy[4] = -2.0 * y[3] + oy;
        dy[5] = oz;
        let r2 = x * x + yy * yy + z * z;
        let r3 = r2 * r2.sqrt();
        let r5 = r3 * r2;
        let pos = [x, yy, z];
        let diag = [p.lambda2, p.lambda1, -1.0];
        let hess = Matrix6::from_fn(|i, j| match (i, j) {
            (0..=2, 3..=5) => f64::from(u8::from(j == i + 3)),
            (3..=5, 0..=2) => {
                let (a, b) = (i - 3, j);
                let d = if a == b { diag[a] - 1.0 / r3 } else { 0.0 };
                d + 3.0 * pos[a] * pos[b] / r5
            }
            (3, 4) => 2.0,
            (4, 3) => -2.0,
            _ => 0.0,
        });
        let phi = Matrix6::from_fn(|i, j| y[6 + 6 * i + j]);
        let d = hess * phi;
        for i in 0..6 {
            for j in 0..6 {
                dy[6 + 6 * i + j] = d[(i, j)];
            }
        }
        Ok(())
    }
}

/// Full 6×6 spatial monodromy along a planar base orbit. This is only a
/// reference for the decoupled planar/vertical integration, which is what
/// everything else uses.
pub fn propagate_spatial_reference(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    s0: &PhaseState,
    t_final: f64,
) -> Result<Matrix6<f64>> {
    let sys = SpatialVariational { params: *params };
    let mut y = [0.0; 42];
    y[..6].copy_from_slice(&[s0.x, s0.y, s0.z, s0.vx, s0.vy, s0.vz]);
    for i in 0..6 {
        y[6 + 7 * i] = 1.0;
    }
    let mut ig = Dop853::new(&sys, cfg, 0.0, y, t_final)?;
    ig.run_to(t_final)?;
    Ok(Matrix6::from_fn(|i, j| ig.y[6 + 6 * i + j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{equilibrium_position, linearization, EquilibriumLabel};
    use crate::regularization::{from_regularized, reg_hamiltonian, to_regularized, Branch};

    fn sj() -> SystemParams {
        SystemParams::new(0.00095).unwrap()
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        struct Osc;
        impl OdeSystem<2> for Osc {
            fn rhs(&self, _t: f64, y: &[f64; 2], dy: &mut [f64; 2]) -> Result<()> {
                *dy = [y[1], -y[0]];
                Ok(())
            }
        }
        let mut ig = Dop853::new(&Osc, &cfg(), 0.0, [1.0, 0.0], 1.0).unwrap();
        ig.run_to(10.0).unwrap();
        assert!((ig.y[0] - 10f64.cos()).abs() < 1e-12);
        assert!((ig.y[1] + 10f64.sin()).abs() < 1e-12);
        let seg = ig.dense().unwrap();
        let tm = 0.5 * (seg.t_old + seg.t_new);
        assert!((seg.eval(tm)[0] - tm.cos()).abs() < 1e-12);
        assert_eq!(seg.eval(seg.t_new), ig.y);
    }

    #[test]
    fn zero_time_is_identity() {
        let s = PhaseState::planar(0.5, 0.1, 0.2, -0.3);
        let tr = propagate(&sj(), &cfg(), &s, 0.0).unwrap();
        assert_eq!(tr.final_state(), s);
        let v = propagate_variational(&sj(), &cfg(), &VariationalState::identity(s), 0.0).unwrap();
        assert_eq!(v.stm, Matrix4::identity());
    }

    #[test]
    fn jacobi_conserved_and_reversible() {
        let p = sj();
        let s = PhaseState::planar(0.3, 0.0, 0.0, 1.6);
        let c0 = p.jacobi_constant(&s).unwrap();
        let tr = propagate(&p, &cfg(), &s, 10.0).unwrap();
        let e = tr.final_state();
        assert!((p.jacobi_constant(&e).unwrap() - c0).abs() < 1e-11);
        let back = propagate(&p, &cfg(), &e, -10.0).unwrap().final_state();
        for (a, b) in back.planar_array().iter().zip(s.planar_array()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stm_at_equilibrium_is_matrix_exponential() {
        let p = sj();
        let [x, y] = equilibrium_position(&p, EquilibriumLabel::L3).unwrap();
        let v = propagate_variational(&p, &cfg(), &VariationalState::identity(PhaseState::planar(x, y, 0.0, 0.0)), 1.0)
            .unwrap();
        let a = linearization(&p, [x, y]).unwrap();
        let expm = a.exp();
        assert!((v.stm - expm).abs().max() < 1e-9);
    }

    #[test]
    fn stm_matches_finite_differences() {
        let p = sj();
        let s = PhaseState::planar(0.4, 0.1, -0.2, 1.2);
        let t = 2.0;
        let v = propagate_variational(&p, &cfg(), &VariationalState::identity(s), t).unwrap();
        let d = 1e-7;
        for j in 0..4 {
            let mut a = s.planar_array();
            let mut b = a;
            a[j] += d;
            b[j] -= d;
            let fa = propagate(&p, &cfg(), &PhaseState::from_planar_array(a), t).unwrap().final_array();
            let fb = propagate(&p, &cfg(), &PhaseState::from_planar_array(b), t).unwrap().final_array();
            for i in 0..4 {
                let fd = (fa[i] - fb[i]) / (2.0 * d);
                assert!((fd - v.stm[(i, j)]).abs() < 1e-5 * v.stm.column(j).amax().max(1.0));
            }
        }
        assert!((v.stm.determinant() - 1.0).abs() < 1e-9);
        assert!((v.vstm.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vertical_block_matches_spatial_reference() {
        let p = sj();
        let s = PhaseState::planar(0.4, 0.1, -0.2, 1.2);
        let v = propagate_variational(&p, &cfg(), &VariationalState::identity(s), 3.0).unwrap();
        let m6 = propagate_spatial_reference(&p, &cfg(), &s, 3.0).unwrap();
        assert!((v.vstm.trace() - (m6[(2, 2)] + m6[(5, 5)])).abs() < 1e-9);
        assert!(m6[(2, 0)].abs() < 1e-14 && m6[(0, 2)].abs() < 1e-14);
    }

    #[test]
    fn y_crossing_events() {
        let p = sj();
        // Near-circular retrograde orbit around the tertiary.
        let r0 = 0.05;
        let s = PhaseState::planar(r0, 0.0, 0.0, -r0.powf(-0.5) - r0);
        let tr = propagate(&p, &cfg(), &s, 0.1).unwrap();
        let (t1, e1) = next_event(&tr, EventKind::YCross(Direction::Increasing), 0.0).unwrap().unwrap();
        assert!(e1.x < 0.0 && e1.vy > 0.0);
        let (t2, e2) = next_event(&tr, EventKind::YCross(Direction::Decreasing), 0.0).unwrap().unwrap();
        assert!(t2 > t1 && e2.x > 0.0);
        assert!(e1.y.abs() < 1e-14 && e2.y.abs() < 1e-14);
        // The start on the section is not an event.
        assert!(t1 > 1e-3);
        assert!(next_event(&tr, EventKind::RMin(1e-3), 0.0).unwrap().is_none());
    }

    #[test]
    fn event_polish_is_idempotent() {
        let p = sj();
        let s = PhaseState::planar(0.3, 0.0, 0.0, 1.6);
        let tr = propagate(&p, &cfg(), &s, 5.0).unwrap();
        let (t1, _) = next_event(&tr, EventKind::YCross(Direction::Either), 0.0).unwrap().unwrap();
        let (t2, _) = next_event(&tr, EventKind::YCross(Direction::Either), t1 - 1e-6).unwrap().unwrap();
        assert!((t1 - t2).abs() < 1e-13);
    }

    #[test]
    fn regularized_matches_physical() {
        let p = sj();
        let s = PhaseState::planar(0.3, 0.1, 0.2, 1.3);
        let r = to_regularized(&p, &s, Branch::Plus).unwrap();
        let rt = propagate_regularized(&p, &cfg(), &r, 2.0).unwrap();
        let rf = rt.final_reg_state();
        assert!(reg_hamiltonian(&p, &rf).abs() < 1e-10);
        let phys = propagate(&p, &cfg(), &s, rf.t_phys).unwrap().final_state();
        let img = from_regularized(&rf).unwrap();
        for (a, b) in img.planar_array().iter().zip(phys.planar_array()) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn regularized_through_collision() {
        let p = sj();
        let r0 = RegState::collision(3.0, 0.4);
        let rt = propagate_regularized(&p, &cfg(), &r0, 1.0).unwrap();
        let rf = rt.final_reg_state();
        assert!(rf.t_phys > 0.0);
        assert!(reg_hamiltonian(&p, &rf).abs() < 1e-10);
        let back = propagate_regularized(&p, &cfg(), &rf, -1.0).unwrap().final_reg_state();
        assert!(back.q1.abs() < 1e-9 && back.q2.abs() < 1e-9, "{back:?}");
        assert!(((back.p1 * back.p1 + back.p2 * back.p2) - 8.0).abs() < 1e-8);
    }

    #[test]
    fn close_approach_escape() {
        let p = sj();
        let sys = PlanarSystem { params: p, escape_radius: 0.05 };
        let s = PhaseState::planar(0.2, 0.0, 0.0, 0.0);
        match propagate_from(sys, &cfg(), &s, 5.0) {
            Err(Error::CloseApproach { r, state, .. }) => {
                assert!(r < 0.05);
                assert!((state[0].hypot(state[1]) - r).abs() < 1e-15);
            }
            other => panic!("expected close approach, got {other:?}"),
        }
    }

    #[test]
    fn regularized_variational_columns() {
        let p = sj();
        let s = PhaseState::planar(0.3, 0.1, 0.2, 1.3);
        let r = to_regularized(&p, &s, Branch::Plus).unwrap();
        let sys = RegularizedVariationalSystem { params: p };
        let mut y = [0.0; REG_VAR_DIM];
        y[..6].copy_from_slice(&[r.q1, r.q2, r.p1, r.p2, 0.0, r.c]);
        for i in 0..6 {
            y[6 + 7 * i] = 1.0;
        }
        y[42] = 1.0;
        y[45] = 1.0;
        let mut ig = Dop853::new(&sys, &cfg(), 0.0, y, 1.0).unwrap();
        ig.run_to(1.0).unwrap();
        let d = 1e-6;
        let run = |c: f64| {
            let r1 = RegState { c, ..r };
            propagate_regularized(&p, &cfg(), &r1, 1.0).unwrap().final_array()
        };
        let (a, b) = (run(r.c + d), run(r.c - d));
        for i in 0..5 {
            let fd = (a[i] - b[i]) / (2.0 * d);
            assert!((fd - ig.y[6 + 6 * i + 5]).abs() < 1e-6, "{i}: {fd} {}", ig.y[6 + 6 * i + 5]);
        }
    }
}
