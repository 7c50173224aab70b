//! Differential correction of periodic orbits and their linear stability.
//!
//! Symmetric orbits start perpendicular to an axis and are closed by asking
//! for a perpendicular crossing after half a period. Asymmetric orbits are
//! closed on the full return to the `y = 0` section. Both are posed as
//! under-determined systems in a small vector of unknowns `u`, completed by a
//! [`Constraint`] (fixed energy, a fixed unknown, or a pseudo-arclength
//! condition), and solved by Newton's method with STM sensitivities.

mod shooting;
pub mod stability;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

pub use stability::{reduced_return_map, StabilityIndices};

use crate::dynamics::{PhaseState, SystemParams};
use crate::error::{Error, Result};
use crate::propagation::{
    next_event, propagate, propagate_regularized, EventKind, IntegratorConfig, REGULARIZATION_RADIUS,
};
use crate::regularization::{from_regularized, RegState};
use shooting::{initial_state, shoot, Shot};

/// Axis a symmetric orbit crosses perpendicularly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Section {
    /// Crossings of `y = 0`.
    XAxis,
    /// Crossings of `x = 0`.
    YAxis,
}

impl Section {
    /// State component measured along the axis.
    pub fn axis_index(self) -> usize {
        match self {
            Section::XAxis => 0,
            Section::YAxis => 1,
        }
    }

    /// State component that vanishes on the section.
    pub fn event_index(self) -> usize {
        1 - self.axis_index()
    }

    /// Velocity across the axis, the free velocity of a perpendicular start.
    pub fn perpendicular_velocity_index(self) -> usize {
        match self {
            Section::XAxis => 3,
            Section::YAxis => 2,
        }
    }

    /// Velocity along the axis, zero at a perpendicular crossing.
    pub fn residual_index(self) -> usize {
        match self {
            Section::XAxis => 2,
            Section::YAxis => 3,
        }
    }

    /// `(position, in-section velocity, eliminated velocity)` indices of the
    /// reduced return map.
    pub fn reduced_indices(self) -> (usize, usize, usize) {
        (self.axis_index(), self.residual_index(), self.perpendicular_velocity_index())
    }

    /// Perpendicular start at position `q` on the axis with speed `v` across it.
    pub fn symmetric_state(self, q: f64, v: f64) -> PhaseState {
        match self {
            Section::XAxis => PhaseState::planar(q, 0.0, 0.0, v),
            Section::YAxis => PhaseState::planar(0.0, q, v, 0.0),
        }
    }

    /// Linear part of the time-reversing reflection that fixes the section.
    pub fn reversor(self) -> Matrix4<f64> {
        match self {
            Section::XAxis => Matrix4::from_diagonal(&[1.0, -1.0, -1.0, 1.0].into()),
            Section::YAxis => Matrix4::from_diagonal(&[-1.0, 1.0, 1.0, -1.0].into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitKind {
    Symmetric(Section),
    /// Closed on the full return to `y = 0` in the starting direction.
    Asymmetric,
}

impl OrbitKind {
    pub fn unknowns(self) -> usize {
        match self {
            OrbitKind::Symmetric(_) => 2,
            OrbitKind::Asymmetric => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    XSymmetric,
    YSymmetric,
    DoublySymmetric,
    Asymmetric,
}

impl std::fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SymmetryClass::XSymmetric => "x-symmetric",
            SymmetryClass::YSymmetric => "y-symmetric",
            SymmetryClass::DoublySymmetric => "doubly-symmetric",
            SymmetryClass::Asymmetric => "asymmetric",
        })
    }
}

impl std::str::FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x-symmetric" => Ok(SymmetryClass::XSymmetric),
            "y-symmetric" => Ok(SymmetryClass::YSymmetric),
            "doubly-symmetric" => Ok(SymmetryClass::DoublySymmetric),
            "asymmetric" => Ok(SymmetryClass::Asymmetric),
            other => Err(Error::InvalidArgument(format!("unknown symmetry class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub c: f64,
    /// Initial state on the reference section.
    pub ic: PhaseState,
    pub period: f64,
    pub ah: f64,
    pub av: f64,
    pub half_a: f64,
    pub half_d: f64,
    pub symmetry: SymmetryClass,
    pub kind: OrbitKind,
    /// Section crossings (in the closing direction, for asymmetric orbits)
    /// up to the closing one.
    pub crossings: usize,
    pub collision: bool,
    pub reg_ic: Option<RegState>,
    /// Fictitious-time period when the orbit was corrected in regularized
    /// variables.
    pub reg_period: Option<f64>,
    /// Smallest distance to the tertiary seen on accepted integration steps.
    pub r_min: f64,
    pub unit_pair_error: f64,
}

impl PeriodicOrbit {
    /// The shooting unknowns of this orbit.
    pub fn unknowns(&self) -> Vec<f64> {
        match self.kind {
            OrbitKind::Symmetric(section) => {
                let a = self.ic.planar_array();
                vec![a[section.axis_index()], a[section.perpendicular_velocity_index()]]
            }
            OrbitKind::Asymmetric => vec![self.ic.x, self.ic.vx, self.ic.vy],
        }
    }

    pub fn stability(&self) -> StabilityIndices {
        StabilityIndices {
            ah: self.ah,
            av: self.av,
            half_a: self.half_a,
            half_d: self.half_d,
            unit_pair_error: self.unit_pair_error,
        }
    }

    /// Largest state difference after one period, integrating in whichever
    /// variables the orbit was corrected in.
    pub fn closure_error(&self, params: &SystemParams, cfg: &IntegratorConfig) -> Result<f64> {
        let end = match (self.reg_ic, self.reg_period) {
            (Some(r0), Some(tau)) => {
                let tr = propagate_regularized(params, cfg, &r0, tau)?;
                let r1 = tr.final_reg_state();
                let d = [
                    r1.q1.abs() - r0.q1.abs(),
                    r1.q2.abs() - r0.q2.abs(),
                    r1.p1.abs() - r0.p1.abs(),
                    r1.p2.abs() - r0.p2.abs(),
                ];
                return Ok(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
            _ => propagate(params, cfg, &self.ic, self.period)?.final_state(),
        };
        Ok(end.planar_array().iter().zip(self.ic.planar_array()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Sample one period for plotting.
    pub fn sample(&self, params: &SystemParams, cfg: &IntegratorConfig, n: usize) -> Result<Vec<[f64; 2]>> {
        let n = n.max(2);
        if let (Some(r0), Some(tau)) = (self.reg_ic, self.reg_period) {
            let tr = propagate_regularized(params, cfg, &r0, tau)?;
            return Ok((0..n)
                .filter_map(|i| tr.reg_state_at(tau * i as f64 / (n - 1) as f64))
                .map(|r| r.position())
                .collect());
        }
        let tr = propagate(params, cfg, &self.ic, self.period)?;
        Ok((0..n).filter_map(|i| tr.state_at(self.period * i as f64 / (n - 1) as f64)).map(|s| [s.x, s.y]).collect())
    }
}

/// Extra scalar equation closing the shooting system.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    FixedC(f64),
    FixedUnknown {
        index: usize,
        value: f64,
    },
    /// `(u − base)·tangent = step` in the space of unknowns.
    Arclength {
        base: Vec<f64>,
        tangent: Vec<f64>,
        step: f64,
    },
    /// Pseudo-arclength in the characteristic plane of the first unknown
    /// and the Jacobi constant: `(u₀ − q)·t_q + (C − c)·t_c = step`.
    Characteristic {
        q: f64,
        c: f64,
        tq: f64,
        tc: f64,
        step: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorOptions {
    pub integrator: IntegratorConfig,
    /// Convergence threshold on the residual norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Which crossing closes the orbit when no time hint is given.
    pub crossings: usize,
    /// Expected half period (symmetric) or period (asymmetric); the crossing
    /// nearest to it is used.
    pub time_hint: Option<f64>,
    /// Give up looking for the closing crossing after this time.
    pub max_time: f64,
    pub allow_regularized: bool,
    pub regularize_below: f64,
    /// Correct in regularized variables from the start.
    pub force_regularized: bool,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions {
            integrator: IntegratorConfig::default(),
            tolerance: 1e-11,
            max_iterations: 25,
            crossings: 1,
            time_hint: None,
            max_time: 500.0,
            allow_regularized: true,
            regularize_below: REGULARIZATION_RADIUS,
            force_regularized: false,
        }
    }
}

/// A converged orbit with the data continuation needs.
#[derive(Debug, Clone)]
pub struct Correction {
    pub orbit: PeriodicOrbit,
    pub iterations: usize,
    /// `∂residual/∂u` at the solution.
    pub jacobian: DMatrix<f64>,
    /// `∂C/∂u` at the solution.
    pub grad_c: DVector<f64>,
}

impl Correction {
    /// Unit null vector of `[∂residual/∂u; ∂C/∂u]` without its last row,
    /// i.e. the family tangent in `u`, oriented along `previous` when given.
    pub fn tangent(&self, previous: Option<&[f64]>) -> Option<DVector<f64>> {
        let m = self.jacobian.ncols();
        let svd = self.jacobian.clone().resize(m, m, 0.0).svd(false, true);
        let v_t = svd.v_t?;
        let (idx, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        let mut t = v_t.row(idx).transpose();
        t /= t.norm();
        if let Some(p) = previous {
            if t.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                t = -t;
            }
        }
        Some(t)
    }
}

fn constraint_value(c: &Constraint, u: &[f64], shot: &Shot) -> (f64, DVector<f64>) {
    let m = u.len();
    match c {
        Constraint::FixedC(target) => (shot.c - target, shot.grad_c.clone()),
        Constraint::FixedUnknown { index, value } => {
            (u[*index] - value, DVector::from_fn(m, |i, _| f64::from(u8::from(i == *index))))
        }
        Constraint::Arclength { base, tangent, step } => {
            let v = (0..m).map(|i| (u[i] - base[i]) * tangent[i]).sum::<f64>() - step;
            (v, DVector::from_row_slice(tangent))
        }
        Constraint::Characteristic { q, c, tq, tc, step } => {
            let v = (u[0] - q) * tq + (shot.c - c) * tc - step;
            let mut g = shot.grad_c.clone() * *tc;
            g[0] += tq;
            (v, g)
        }
    }
}

fn norm_of(shot: &Shot, h: f64) -> f64 {
    shot.residual.amax().max(h.abs())
}

/// Newton iteration for `kind` from the guess `u0`.
pub fn correct(
    params: &SystemParams,
    kind: OrbitKind,
    u0: &[f64],
    constraint: &Constraint,
    opts: &CorrectorOptions,
) -> Result<Correction> {
    if u0.len() != kind.unknowns() {
        return Err(Error::InvalidArgument(format!("expected {} unknowns, got {}", kind.unknowns(), u0.len())));
    }
    let mut regularized = opts.force_regularized;
    let first = match shoot(params, kind, u0, opts, regularized) {
        Err(Error::CloseApproach { .. }) if opts.allow_regularized && !regularized => {
            regularized = true;
            shoot(params, kind, u0, opts, true)?
        }
        other => other?,
    };
    newton(params, kind, u0.to_vec(), first, constraint, opts, regularized)
}

fn newton(
    params: &SystemParams,
    kind: OrbitKind,
    mut u: Vec<f64>,
    mut shot: Shot,
    constraint: &Constraint,
    opts: &CorrectorOptions,
    mut regularized: bool,
) -> Result<Correction> {
    let m = u.len();
    let mut local = opts.clone();
    let mut norm = {
        let (h, _) = constraint_value(constraint, &u, &shot);
        norm_of(&shot, h)
    };
    for iteration in 0..=opts.max_iterations {
        if norm < opts.tolerance {
            return finish(params, kind, &u, shot, iteration, regularized);
        }
        if iteration == opts.max_iterations {
            break;
        }
        let (h, grad_h) = constraint_value(constraint, &u, &shot);
        let mut a = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for i in 0..shot.residual.len() {
            for j in 0..m {
                a[(i, j)] = shot.jacobian[(i, j)];
            }
            b[i] = -shot.residual[i];
        }
        for j in 0..m {
            a[(m - 1, j)] = grad_h[j];
        }
        b[m - 1] = -h;
        let delta = a.lu().solve(&b).ok_or(Error::Divergence { iterations: iteration, residual: norm })?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Divergence { iterations: iteration, residual: norm });
        }
        // Keep following the same crossing as the iterate moves.
        local.time_hint = Some(shot.time);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let trial: Vec<f64> = (0..m).map(|i| u[i] + lambda * delta[i]).collect();
            let attempt = match shoot(params, kind, &trial, &local, regularized) {
                Err(Error::CloseApproach { .. }) if opts.allow_regularized && !regularized => {
                    regularized = true;
                    shoot(params, kind, &trial, &local, true)
                }
                other => other,
            };
            if let Ok(s) = attempt {
                let (h_new, _) = constraint_value(constraint, &trial, &s);
                let n_new = norm_of(&s, h_new);
                if n_new.is_finite() && (n_new < 2.0 * norm || n_new < opts.tolerance) {
                    accepted = Some((trial, s, n_new));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, s, n_new)) = accepted else {
            return Err(Error::Divergence { iterations: iteration + 1, residual: norm });
        };
        let step = delta.amax() * lambda;
        u = trial;
        shot = s;
        norm = n_new;
        // Converged to roundoff: the step no longer changes the unknowns.
        let scale = u.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if step < 1e-14 * scale && norm < 1e3 * opts.tolerance {
            return finish(params, kind, &u, shot, iteration + 1, regularized);
        }
    }
    Err(Error::Divergence { iterations: opts.max_iterations, residual: norm })
}

fn finish(
    params: &SystemParams,
    kind: OrbitKind,
    u: &[f64],
    shot: Shot,
    iterations: usize,
    regularized: bool,
) -> Result<Correction> {
    let ic = initial_state(kind, u);
    let (section, monodromy, vertical, period) = match kind {
        OrbitKind::Symmetric(section) => {
            let m =
                stability::symmetric_monodromy(section, &shot.stm).unwrap_or_else(|| Matrix4::from_element(f64::NAN));
            let w =
                stability::symmetric_vertical_monodromy(&shot.vstm).unwrap_or_else(|| Matrix2::from_element(f64::NAN));
            (section, m, w, 2.0 * shot.time)
        }
        OrbitKind::Asymmetric => (Section::XAxis, shot.stm, shot.vstm, shot.time),
    };
    let idx = stability::indices(params, &ic, section, &monodromy, &vertical)?;
    let symmetry = match (kind, shot.end) {
        (OrbitKind::Asymmetric, _) => SymmetryClass::Asymmetric,
        (OrbitKind::Symmetric(sec), Some(end)) => {
            let a = ic.planar_array();
            let b = end.planar_array();
            let (p, v) = (sec.axis_index(), sec.perpendicular_velocity_index());
            let tol = 1e-8 * (1.0 + a[p].abs() + a[v].abs());
            if (a[p] + b[p]).abs() < tol && (a[v] + b[v]).abs() < tol {
                SymmetryClass::DoublySymmetric
            } else if sec == Section::XAxis {
                SymmetryClass::XSymmetric
            } else {
                SymmetryClass::YSymmetric
            }
        }
        (OrbitKind::Symmetric(Section::XAxis), None) => SymmetryClass::XSymmetric,
        (OrbitKind::Symmetric(Section::YAxis), None) => SymmetryClass::YSymmetric,
    };
    let orbit = PeriodicOrbit {
        c: shot.c,
        ic,
        period,
        ah: idx.ah,
        av: idx.av,
        half_a: idx.half_a,
        half_d: idx.half_d,
        symmetry,
        kind,
        crossings: shot.crossing,
        collision: regularized,
        reg_ic: if regularized { shot.reg_ic } else { None },
        reg_period: if regularized { shot.tau.map(|t| 2.0 * t) } else { None },
        r_min: shot.r_min,
        unit_pair_error: idx.unit_pair_error,
    };
    Ok(Correction { orbit, iterations, jacobian: shot.jacobian, grad_c: shot.grad_c })
}

/// Closing residual of a single shot, without correction.
pub fn shooting_residual(
    params: &SystemParams,
    kind: OrbitKind,
    u: &[f64],
    opts: &CorrectorOptions,
) -> Result<DVector<f64>> {
    Ok(shoot(params, kind, u, opts, opts.force_regularized)?.residual)
}

/// Time of the section crossing a single shot closes at.
pub fn shooting_time(params: &SystemParams, kind: OrbitKind, u: &[f64], opts: &CorrectorOptions) -> Result<f64> {
    Ok(shoot(params, kind, u, opts, opts.force_regularized)?.time)
}

/// `∂residual/∂u` of a single shot, without correction.
pub fn shooting_jacobian(
    params: &SystemParams,
    kind: OrbitKind,
    u: &[f64],
    opts: &CorrectorOptions,
) -> Result<DMatrix<f64>> {
    Ok(shoot(params, kind, u, opts, opts.force_regularized)?.jacobian)
}

/// Correct a symmetric orbit from a perpendicular-start guess `(q₀, v₀)`:
/// position along `section` and speed across it.
pub fn correct_symmetric(
    params: &SystemParams,
    guess: (f64, f64),
    section: Section,
    constraint: &Constraint,
    opts: &CorrectorOptions,
) -> Result<PeriodicOrbit> {
    Ok(correct(params, OrbitKind::Symmetric(section), &[guess.0, guess.1], constraint, opts)?.orbit)
}

/// Correct an orbit that is not assumed symmetric, starting on `y = 0`.
/// `period_guess` selects which return to the section closes it.
pub fn correct_asymmetric(
    params: &SystemParams,
    guess: &PhaseState,
    period_guess: f64,
    constraint: &Constraint,
    opts: &CorrectorOptions,
) -> Result<PeriodicOrbit> {
    if guess.y.abs() > 1e-12 {
        return Err(Error::InvalidArgument("asymmetric guesses must start on y = 0".into()));
    }
    let opts = CorrectorOptions { time_hint: Some(period_guess), ..opts.clone() };
    Ok(correct(params, OrbitKind::Asymmetric, &[guess.x, guess.vx, guess.vy], constraint, &opts)?.orbit)
}

/// Recompute the stability indices of a converged orbit from a fresh shot.
pub fn stability(params: &SystemParams, orbit: &PeriodicOrbit, opts: &CorrectorOptions) -> Result<StabilityIndices> {
    let hint = match orbit.kind {
        OrbitKind::Symmetric(_) => orbit.period / 2.0,
        OrbitKind::Asymmetric => orbit.period,
    };
    let local = CorrectorOptions { time_hint: Some(hint), force_regularized: orbit.collision, ..opts.clone() };
    let shot = shoot(params, orbit.kind, &orbit.unknowns(), &local, orbit.collision)?;
    Ok(finish(params, orbit.kind, &orbit.unknowns(), shot, 0, orbit.collision)?.orbit.stability())
}

/// Physical state of a converged orbit a given time after its initial
/// condition, integrating in regularized variables when needed.
pub fn state_after(params: &SystemParams, cfg: &IntegratorConfig, orbit: &PeriodicOrbit, t: f64) -> Result<PhaseState> {
    if let (Some(r0), Some(tau)) = (orbit.reg_ic, orbit.reg_period) {
        let tr = propagate_regularized(params, cfg, &r0, tau * (t / orbit.period).ceil().max(1.0))?;
        let hit = tr.next_event_with(&|y| y[4] - t, crate::propagation::Direction::Increasing, 0.0)?;
        let (_, y) = hit.ok_or(Error::EventNotFound(t))?;
        return from_regularized(&RegState::from_array(&y, r0.c)).ok_or(Error::Collision { r: 0.0 });
    }
    Ok(propagate(params, cfg, &orbit.ic, t)?.final_state())
}

/// Times and states of all crossings of `y = 0` over one period.
pub fn x_axis_crossings(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    orbit: &PeriodicOrbit,
) -> Result<Vec<(f64, PhaseState)>> {
    let tr = propagate(params, cfg, &orbit.ic, orbit.period * (1.0 + 1e-9))?;
    let mut out = Vec::new();
    let mut after = 0.0;
    while let Some((t, s)) = next_event(&tr, EventKind::YCross(crate::propagation::Direction::Either), after)? {
        out.push((t, s));
        after = t;
    }
    Ok(out)
}

/// Positions along `period` time units from a planar initial condition,
/// equally spaced in physical time. The flow is integrated in Levi-Civita
/// variables, so arcs through or near the collision are sampled as well.
pub fn sample_path(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    ic: &PhaseState,
    period: f64,
    n: usize,
) -> Result<Vec<[f64; 2]>> {
    let n = n.max(2);
    let r0 = crate::regularization::to_regularized(params, ic, crate::regularization::Branch::Plus)?;
    // dt/dτ = 4ρ; start from the initial rate and extend until `period` is covered.
    let mut tau = period / (4.0 * r0.rho());
    let tr = loop {
        let tr = propagate_regularized(params, cfg, &r0, tau)?;
        if tr.final_array()[4] >= period {
            break tr;
        }
        tau *= 2.0;
    };
    let mut out = vec![[ic.x, ic.y]];
    let mut after = 0.0;
    for i in 1..n {
        let t = period * i as f64 / (n - 1) as f64;
        let g = move |y: &[f64; 5]| y[4] - t;
        let (tau_i, y) =
            tr.next_event_with(&g, crate::propagation::Direction::Increasing, after)?.ok_or(Error::EventNotFound(t))?;
        out.push(RegState::from_array(&y, r0.c).position());
        after = tau_i;
    }
    Ok(out)
}

/// First downward crossing of the horizontal line `y = level` on the
/// `x > 0` side, within one period of the initial condition.
pub fn line_crossing(
    params: &SystemParams,
    cfg: &IntegratorConfig,
    orbit: &PeriodicOrbit,
    level: f64,
) -> Result<(f64, PhaseState)> {
    let tr = propagate(params, cfg, &orbit.ic, orbit.period * 1.01)?;
    let mut after = 0.0;
    while let Some((t, y)) = tr.next_event_with(&|y| y[1] - level, crate::propagation::Direction::Decreasing, after)? {
        if y[0] > 0.0 {
            return Ok((t, PhaseState::from_planar_array(y)));
        }
        after = t;
    }
    Err(Error::EventNotFound(orbit.period))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::propagate_variational;
    use crate::propagation::VariationalState;

    fn sj() -> SystemParams {
        SystemParams::new(0.00095).unwrap()
    }

    fn retrograde_guess(r0: f64) -> (f64, f64) {
        (r0, -r0.powf(-0.5) - r0)
    }

    #[test]
    fn retrograde_circle_converges_and_is_bistable() {
        let p = sj();
        let g = retrograde_guess(0.05);
        let c0 = p.jacobi_constant(&Section::XAxis.symmetric_state(g.0, g.1)).unwrap();
        let res = correct(
            &p,
            OrbitKind::Symmetric(Section::XAxis),
            &[g.0, g.1],
            &Constraint::FixedC(c0),
            &CorrectorOptions::default(),
        )
        .unwrap();
        assert!(res.iterations <= 5, "{}", res.iterations);
        let o = res.orbit;
        assert!((o.c - c0).abs() < 1e-12);
        assert!(o.ah.abs() < 2.0 && o.av.abs() < 2.0, "{} {}", o.ah, o.av);
        assert!((o.half_a - o.half_d).abs() < 1e-8);
        assert!(o.unit_pair_error < 1e-6);
        assert_eq!(o.symmetry, SymmetryClass::DoublySymmetric);
        assert!(o.closure_error(&p, &IntegratorConfig::default()).unwrap() < 1e-10);
    }

    #[test]
    fn exact_orbit_needs_no_step() {
        let p = sj();
        let g = retrograde_guess(0.1);
        let opts = CorrectorOptions::default();
        let kind = OrbitKind::Symmetric(Section::XAxis);
        let first = correct(&p, kind, &[g.0, g.1], &Constraint::FixedUnknown { index: 0, value: g.0 }, &opts).unwrap();
        let u = first.orbit.unknowns();
        let again = correct(&p, kind, &u, &Constraint::FixedUnknown { index: 0, value: u[0] }, &opts).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.orbit.unknowns(), u);
    }

    #[test]
    fn half_period_monodromy_matches_full_integration() {
        let p = sj();
        let g = retrograde_guess(0.2);
        let o = correct_symmetric(
            &p,
            g,
            Section::XAxis,
            &Constraint::FixedUnknown { index: 0, value: g.0 },
            &CorrectorOptions::default(),
        )
        .unwrap();
        let v = propagate_variational(&p, &IntegratorConfig::default(), &VariationalState::identity(o.ic), o.period)
            .unwrap();
        let full = stability::indices(&p, &o.ic, Section::XAxis, &v.stm, &v.vstm).unwrap();
        assert!((full.ah - o.ah).abs() < 1e-8, "{} {}", full.ah, o.ah);
        assert!((full.av - o.av).abs() < 1e-8, "{} {}", full.av, o.av);
    }

    #[test]
    fn asymmetric_corrector_reproduces_symmetric_orbit() {
        let p = sj();
        let g = retrograde_guess(0.2);
        let o = correct_symmetric(
            &p,
            g,
            Section::XAxis,
            &Constraint::FixedUnknown { index: 0, value: g.0 },
            &CorrectorOptions::default(),
        )
        .unwrap();
        let mut guess = o.ic;
        guess.vx += 1e-6;
        let a =
            correct_asymmetric(&p, &guess, o.period, &Constraint::FixedC(o.c), &CorrectorOptions::default()).unwrap();
        assert!((a.ah - o.ah).abs() < 1e-8);
        assert!((a.period - o.period).abs() < 1e-9);
        assert!(a.ic.vx.abs() < 1e-9);
    }

    #[test]
    fn non_periodic_guess_fails() {
        let p = sj();
        let opts = CorrectorOptions { max_iterations: 6, max_time: 30.0, ..Default::default() };
        let r = correct_symmetric(
            &p,
            (1.7, 0.9),
            Section::XAxis,
            &Constraint::FixedUnknown { index: 0, value: 1.7 },
            &opts,
        );
        assert!(r.is_err());
    }

    #[test]
    fn regularized_corrector_agrees_with_physical() {
        let p = sj();
        let g = retrograde_guess(0.05);
        let con = Constraint::FixedUnknown { index: 0, value: g.0 };
        let phys = correct_symmetric(&p, g, Section::XAxis, &con, &CorrectorOptions::default()).unwrap();
        let reg_opts = CorrectorOptions { force_regularized: true, ..Default::default() };
        let reg = correct_symmetric(&p, g, Section::XAxis, &con, &reg_opts).unwrap();
        assert!(reg.collision && !phys.collision);
        assert!((reg.c - phys.c).abs() < 1e-10);
        assert!((reg.period - phys.period).abs() < 1e-10);
        assert!((reg.ah - phys.ah).abs() < 1e-7, "{} {}", reg.ah, phys.ah);
        assert!((reg.av - phys.av).abs() < 1e-7, "{} {}", reg.av, phys.av);
        assert!(reg.closure_error(&p, &IntegratorConfig::default()).unwrap() < 1e-10);
    }
}
