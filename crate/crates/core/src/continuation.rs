//! Pseudo-arclength continuation of periodic-orbit families in the Jacobi
//! constant, with event detection and branch switching.
//!
//! A family is traced in the characteristic plane `(q₀, C)`, where `q₀` is
//! the position of the initial condition along its section axis. Each step
//! predicts along the secant of the last two members and corrects on the
//! line perpendicular to it. Between consecutive members the stability
//! indices, the sign of `dC/ds` and the distance to the tertiary are
//! monitored; every sign change is refined by Illinois iteration in
//! arclength and the refined orbit is inserted as a member of its own.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PhaseState, SystemParams};
use crate::equilibria::{linear_seed, lyapunov_seed_l1, SeedKind};
use crate::error::{Error, Result};
use crate::periodic::{correct, Constraint, Correction, CorrectorOptions, OrbitKind, PeriodicOrbit, Section};

/// Named families that can be seeded directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilySeed {
    /// Direct circular orbits around the tertiary.
    #[serde(rename = "g")]
    G,
    /// Retrograde circular orbits around the tertiary.
    #[serde(rename = "f")]
    F,
    /// Planar Lyapunov orbits around `L1`.
    #[serde(rename = "a")]
    A,
    /// Planar Lyapunov orbits around `L2`, the origin-symmetric image of `a`.
    #[serde(rename = "a2")]
    A2,
    #[serde(rename = "g-upper")]
    GUpper,
    #[serde(rename = "g-lower")]
    GLower,
    /// Double-periodic family with a maximum of `C` near 4.245.
    #[serde(rename = "Hb")]
    Hb,
    /// Period-doubling branch of `g-upper`.
    #[serde(rename = "Ha")]
    Ha,
    /// Short-period Lyapunov orbits around `L3`.
    #[serde(rename = "short")]
    Short,
    /// Long-period Lyapunov orbits around `L3`.
    #[serde(rename = "long")]
    Long,
}

impl FamilySeed {
    pub const ALL: [FamilySeed; 10] = [
        FamilySeed::G,
        FamilySeed::F,
        FamilySeed::A,
        FamilySeed::A2,
        FamilySeed::GUpper,
        FamilySeed::GLower,
        FamilySeed::Hb,
        FamilySeed::Ha,
        FamilySeed::Short,
        FamilySeed::Long,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilySeed::G => "g",
            FamilySeed::F => "f",
            FamilySeed::A => "a",
            FamilySeed::A2 => "a2",
            FamilySeed::GUpper => "g-upper",
            FamilySeed::GLower => "g-lower",
            FamilySeed::Hb => "Hb",
            FamilySeed::Ha => "Ha",
            FamilySeed::Short => "short",
            FamilySeed::Long => "long",
        }
    }

    /// Direction in `C` in which the family grows away from its seed.
    pub fn default_heading(self) -> Heading {
        match self {
            FamilySeed::Long | FamilySeed::Hb => Heading::IncreasingC,
            _ => Heading::DecreasingC,
        }
    }
}

impl fmt::Display for FamilySeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilySeed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilySeed::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Heading {
    IncreasingC,
    DecreasingC,
}

impl Heading {
    fn sign(self) -> f64 {
        match self {
            Heading::IncreasingC => 1.0,
            Heading::DecreasingC => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Limits {
    pub c_min: f64,
    pub c_max: f64,
    pub max_members: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { c_min: -1000.0, c_max: 1000.0, max_members: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub limits: Limits,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Newton iterations allowed per step before the step is refined.
    pub newton_budget: usize,
    pub corrector: CorrectorOptions,
    /// Refine and record events; switching this off only traces members.
    pub detect_events: bool,
    /// Distance to the tertiary below which a local minimum along the family
    /// is reported as a collision orbit.
    pub collision_radius: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            limits: Limits::default(),
            initial_step: 1e-3,
            min_step: 1e-7,
            max_step: 0.05,
            newton_budget: 12,
            corrector: CorrectorOptions::default(),
            detect_events: true,
            collision_radius: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "level", rename_all = "camelCase")]
pub enum EventKind {
    TurningPoint,
    AhCritical(i8),
    AvCritical(i8),
    Collision,
    Bifurcation,
    TerminationAsymptote,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::TurningPoint => f.write_str("turningPoint"),
            EventKind::AhCritical(l) => write!(f, "ahCritical({l:+})"),
            EventKind::AvCritical(l) => write!(f, "avCritical({l:+})"),
            EventKind::Collision => f.write_str("collision"),
            EventKind::Bifurcation => f.write_str("bifurcation"),
            EventKind::TerminationAsymptote => f.write_str("terminationAsymptote"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    #[serde(rename = "C")]
    pub c: f64,
    pub detail: String,
    /// Index of the member at which the event sits.
    pub member: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Termination {
    /// The next member would leave `[c_min, c_max]`.
    Limit,
    MaxMembers,
    Asymptote,
    /// The corrector failed at the smallest allowed step.
    Divergence,
    /// The family folds back on itself at a multiple cover of another orbit.
    Cover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub name: String,
    pub mu: f64,
    pub members: Vec<PeriodicOrbit>,
    /// Arclength of each member in the characteristic plane.
    pub arclength: Vec<f64>,
    pub events: Vec<Event>,
    pub termination: Termination,
}

impl FamilyRecord {
    pub fn truncated(&self) -> bool {
        self.termination == Termination::Divergence
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

fn circle_guess(r: f64, direct: bool) -> ((f64, f64), f64) {
    let n = r.powf(-1.5);
    if direct {
        ((r, r.powf(-0.5) - r), std::f64::consts::PI / (n - 1.0))
    } else {
        ((r, -r.powf(-0.5) - r), std::f64::consts::PI / (n + 1.0))
    }
}

fn correct_at_fixed_c(
    params: &SystemParams,
    section: Section,
    guess: PhaseState,
    half_period: f64,
    opts: &CorrectorOptions,
) -> Result<Correction> {
    let c = params.jacobi_constant(&guess)?;
    let a = guess.planar_array();
    let u = [a[section.axis_index()], a[section.perpendicular_velocity_index()]];
    let opts = CorrectorOptions { time_hint: Some(half_period), ..opts.clone() };
    correct(params, OrbitKind::Symmetric(section), &u, &Constraint::FixedC(c), &opts)
}

const CIRCLE_RADIUS: f64 = 0.01;
const LYAPUNOV_AMPLITUDE: f64 = 1e-3;

/// Search window and grid used to seed `Hb`.
pub const HB_SEARCH_C: f64 = 4.24;
pub const HB_SEARCH_X: (f64, f64, usize) = (0.01, 1.5, 600);
/// Period window separating `Hb` from the doubly covered members of the
/// period-doubled branch of g-upper that the same scan finds.
pub const HB_PERIOD: (f64, f64) = (5.0, 6.0);

/// Corrected first member of a named family.
pub fn seed_family(params: &SystemParams, seed: FamilySeed) -> Result<PeriodicOrbit> {
    seed_family_with(params, seed, &ContinuationOptions::default())
}

pub fn seed_family_with(params: &SystemParams, seed: FamilySeed, opts: &ContinuationOptions) -> Result<PeriodicOrbit> {
    let co = &opts.corrector;
    match seed {
        FamilySeed::G | FamilySeed::F => {
            let ((x0, vy0), half) = circle_guess(CIRCLE_RADIUS, seed == FamilySeed::G);
            let s = PhaseState::planar(x0, 0.0, 0.0, vy0);
            Ok(correct_at_fixed_c(params, Section::XAxis, s, half, co)?.orbit)
        }
        FamilySeed::A | FamilySeed::A2 => {
            let (s, period) = lyapunov_seed_l1(params, LYAPUNOV_AMPLITUDE)?;
            let s = if seed == FamilySeed::A2 { mirror(&s) } else { s };
            Ok(correct_at_fixed_c(params, Section::XAxis, s, period / 2.0, co)?.orbit)
        }
        FamilySeed::Short | FamilySeed::Long => {
            let kind = if seed == FamilySeed::Short { SeedKind::Short } else { SeedKind::Long };
            let ls = linear_seed(params, kind, LYAPUNOV_AMPLITUDE)?;
            Ok(correct_at_fixed_c(params, Section::YAxis, ls.state, ls.period / 2.0, co)?.orbit)
        }
        FamilySeed::Hb => hb_seed(params, co),
        FamilySeed::GUpper | FamilySeed::GLower => {
            let branches = g_branches(params, opts)?;
            Ok(if seed == FamilySeed::GUpper { branches.0 } else { branches.1 })
        }
        FamilySeed::Ha => {
            let (upper, _) = g_branches(params, opts)?;
            let o = ContinuationOptions {
                limits: Limits { c_min: 4.05, c_max: f64::INFINITY, max_members: 100_000 },
                ..opts.clone()
            };
            let rec = continue_family(params, "g-upper", &upper, Heading::DecreasingC, &o)?;
            let idx = rec
                .events
                .iter()
                .position(|e| e.kind == EventKind::Bifurcation && e.detail.contains("period doubling"))
                .ok_or_else(|| Error::BranchNotFound("no period-doubling point on g-upper".into()))?;
            let branches = branch_switch(params, &rec, idx, opts)?;
            let start = branches.orbits.first().ok_or_else(|| Error::BranchNotFound("Ha".into()))?;
            // March a short way off the branch point so that the seed has a
            // definite direction in C and cannot fall back onto the parent.
            let cb = rec.events[idx].c;
            let o = ContinuationOptions {
                limits: Limits { c_min: cb - HA_SEED_OFFSET, c_max: cb + HA_SEED_OFFSET, max_members: 10_000 },
                detect_events: false,
                ..opts.clone()
            };
            let walk = continue_branch(params, "Ha", start, &branches.base, &o)?;
            Ok(*walk.members.last().expect("seed member"))
        }
    }
}

/// `S∘S'` image of a planar state.
pub fn mirror(s: &PhaseState) -> PhaseState {
    PhaseState::planar(-s.x, -s.y, -s.vx, -s.vy)
}

/// The two branches born at the first bifurcation of family `g`, upper
/// (larger `x₀`) first.
fn g_branches(params: &SystemParams, opts: &ContinuationOptions) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let g = seed_family_with(params, FamilySeed::G, opts)?;
    let o = ContinuationOptions {
        limits: Limits { c_min: 4.4, c_max: f64::INFINITY, max_members: 100_000 },
        ..opts.clone()
    };
    let rec = continue_family(params, "g", &g, Heading::DecreasingC, &o)?;
    let idx = rec
        .events
        .iter()
        .position(|e| e.kind == EventKind::Bifurcation)
        .ok_or_else(|| Error::BranchNotFound("no bifurcation on g".into()))?;
    let mut b = branch_switch(params, &rec, idx, opts)?.orbits;
    if b.len() < 2 {
        return Err(Error::BranchNotFound("g-upper/g-lower".into()));
    }
    let lower = b.pop().expect("two branches");
    let upper = b.pop().expect("two branches");
    Ok((upper, lower))
}

const HA_SEED_OFFSET: f64 = 2e-3;

/// Grid search at fixed `C` for x-symmetric orbits closing at their second
/// perpendicular crossing of the x-axis, keeping those that are not a
/// double cover of a simple orbit. Returns the solution with the largest
/// `x₀` whose period lies in [`HB_PERIOD`].
fn hb_seed(params: &SystemParams, co: &CorrectorOptions) -> Result<PeriodicOrbit> {
    let candidates = double_periodic_scan(params, HB_SEARCH_C, HB_SEARCH_X, co)?;
    candidates
        .into_iter()
        .find(|o| o.period > HB_PERIOD.0 && o.period < HB_PERIOD.1)
        .ok_or_else(|| Error::BranchNotFound("Hb".into()))
}

/// All distinct double-periodic x-symmetric orbits found by scanning
/// `x₀ ∈ [lo, hi]` at fixed `C` with `ẏ₀ > 0`, sorted by decreasing `x₀`.
pub fn double_periodic_scan(
    params: &SystemParams,
    c: f64,
    (lo, hi, n): (f64, f64, usize),
    co: &CorrectorOptions,
) -> Result<Vec<PeriodicOrbit>> {
    use crate::propagation::{next_event, propagate, Direction, EventKind as Ev};
    let cfg = &co.integrator;
    let residual = |x: f64| -> Option<(f64, f64)> {
        let omega = params.effective_potential(&PhaseState::planar(x, 0.0, 0.0, 0.0)).ok()?;
        let v2 = 2.0 * omega - c;
        if v2 <= 0.0 {
            return None;
        }
        let s = PhaseState::planar(x, 0.0, 0.0, v2.sqrt());
        let tr = propagate(params, cfg, &s, 30.0).ok()?;
        let (t1, _) = next_event(&tr, Ev::YCross(Direction::Either), 0.0).ok()??;
        let (t2, s2) = next_event(&tr, Ev::YCross(Direction::Either), t1).ok()??;
        Some((s2.vx, t2))
    };
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<Option<(f64, f64)>> = xs.iter().map(|&x| residual(x)).collect();
    let mut found: Vec<PeriodicOrbit> = Vec::new();
    for i in (1..n).rev() {
        let (Some((f0, t0)), Some((f1, t1))) = (vals[i - 1], vals[i]) else { continue };
        if f0 * f1 > 0.0 || (t0 - t1).abs() > 0.2 * t0.max(t1) {
            continue;
        }
        let x = xs[i - 1] + (xs[i] - xs[i - 1]) * f0 / (f0 - f1);
        let Some(omega) = params.effective_potential(&PhaseState::planar(x, 0.0, 0.0, 0.0)).ok() else { continue };
        let s = PhaseState::planar(x, 0.0, 0.0, (2.0 * omega - c).sqrt());
        let Ok(corr) = correct_at_fixed_c(params, Section::XAxis, s, 0.5 * (t0 + t1), co) else { continue };
        let o = corr.orbit;
        if o.crossings < 2 || is_double_cover(params, &o, co) {
            continue;
        }
        if found.iter().all(|f| (f.ic.x - o.ic.x).abs() > 1e-6) {
            found.push(o);
        }
    }
    Ok(found)
}

/// Whether an orbit closing at its second crossing already closes at its
/// first.
fn is_double_cover(params: &SystemParams, o: &PeriodicOrbit, co: &CorrectorOptions) -> bool {
    is_cover(params, o, 2, co, 1e-8)
}

/// Whether `o` closes after `1/k` of its period, i.e. traces a shorter
/// periodic orbit `k` times.
fn is_cover(params: &SystemParams, o: &PeriodicOrbit, k: usize, co: &CorrectorOptions, tol: f64) -> bool {
    let part = o.period / k as f64;
    let hint = match o.kind {
        OrbitKind::Symmetric(_) => part / 2.0,
        OrbitKind::Asymmetric => part,
    };
    let opts = CorrectorOptions { time_hint: Some(hint), ..co.clone() };
    match crate::periodic::shooting_residual(params, o.kind, &o.unknowns(), &opts) {
        Ok(r) => r.amax() < tol,
        Err(_) => false,
    }
}

/// Data kept for the member at the head of the continuation.
struct Node {
    corr: Correction,
    s: f64,
    /// Unit tangent in the space of unknowns, oriented along the march.
    tangent: DVector<f64>,
    regularized: bool,
    /// Residual at the first section crossing, for members that close later.
    early: Option<f64>,
}

fn char_point(o: &PeriodicOrbit) -> (f64, f64) {
    (o.unknowns()[0], o.c)
}

fn time_hint(o: &PeriodicOrbit) -> f64 {
    match o.kind {
        OrbitKind::Symmetric(_) => o.period / 2.0,
        OrbitKind::Asymmetric => o.period,
    }
}

/// `dC/ds` along a unit tangent in the characteristic plane.
fn dc_ds(corr: &Correction, tangent: &DVector<f64>) -> f64 {
    let dc = corr.grad_c.dot(tangent);
    dc / (tangent[0] * tangent[0] + dc * dc).sqrt()
}

#[derive(Debug, Clone, Copy)]
enum Monitor {
    Ah(f64),
    HalfA(f64),
    Av(f64),
    DcDs,
    /// Signed residual at the first section crossing; it vanishes where a
    /// symmetric member closes early and so covers a shorter orbit.
    FirstCrossing,
}

impl Monitor {
    fn value(self, st: &Stepper<'_>, corr: &Correction, tangent: &DVector<f64>) -> f64 {
        let o = &corr.orbit;
        match self {
            Monitor::Ah(l) => o.ah - l,
            Monitor::HalfA(l) => o.half_a - l,
            Monitor::Av(l) => o.av - l,
            Monitor::DcDs => dc_ds(corr, tangent),
            Monitor::FirstCrossing => st.first_crossing_residual(o).unwrap_or(f64::NAN),
        }
    }
}

struct Stepper<'a> {
    params: &'a SystemParams,
    opts: &'a ContinuationOptions,
}

impl Stepper<'_> {
    fn corrector(&self, hint: f64, regularized: bool) -> CorrectorOptions {
        CorrectorOptions {
            time_hint: Some(hint),
            max_iterations: self.opts.newton_budget,
            force_regularized: regularized,
            ..self.opts.corrector.clone()
        }
    }

    /// Correct on the line at characteristic distance `step` from `from`
    /// along the direction `(tq, tc)`, starting from `guess`.
    fn correct_on_line(
        &self,
        from: &PeriodicOrbit,
        (tq, tc): (f64, f64),
        step: f64,
        guess: &[f64],
        regularized: bool,
    ) -> Result<Correction> {
        let (q, c) = char_point(from);
        let con = Constraint::Characteristic { q, c, tq, tc, step };
        let co = self.corrector(time_hint(from), regularized);
        correct(self.params, from.kind, guess, &con, &co)
    }

    fn first_crossing_time(&self, o: &PeriodicOrbit) -> Option<f64> {
        let co = CorrectorOptions {
            time_hint: None,
            crossings: 1,
            force_regularized: o.collision,
            ..self.opts.corrector.clone()
        };
        crate::periodic::shooting_time(self.params, o.kind, &o.unknowns(), &co).ok()
    }

    fn first_crossing_residual(&self, o: &PeriodicOrbit) -> Option<f64> {
        if !matches!(o.kind, OrbitKind::Symmetric(_)) || o.crossings < 2 {
            return None;
        }
        let co = CorrectorOptions {
            time_hint: None,
            crossings: 1,
            force_regularized: o.collision,
            ..self.opts.corrector.clone()
        };
        crate::periodic::shooting_residual(self.params, o.kind, &o.unknowns(), &co).ok().map(|r| r[0])
    }

    fn orient(&self, corr: &Correction, along: &DVector<f64>) -> DVector<f64> {
        corr.tangent(Some(along.as_slice())).unwrap_or_else(|| along.clone())
    }

    /// Illinois iteration in arclength for a zero of `monitor` between
    /// `a` and `b`.
    fn refine(&self, a: &Node, b: &Node, monitor: Monitor) -> Result<(Correction, DVector<f64>, f64)> {
        let (qa, ca) = char_point(&a.corr.orbit);
        let (qb, cb) = char_point(&b.corr.orbit);
        let len = ((qb - qa).powi(2) + (cb - ca).powi(2)).sqrt();
        let dir = ((qb - qa) / len, (cb - ca) / len);
        let ua = DVector::from_vec(a.corr.orbit.unknowns());
        let ub = DVector::from_vec(b.corr.orbit.unknowns());
        let regularized = a.regularized || b.regularized;
        let mut lo = (0.0, monitor.value(self, &a.corr, &a.tangent));
        let mut hi = (len, monitor.value(self, &b.corr, &b.tangent));
        let mut side = 0i8;
        let mut best: Option<(Correction, DVector<f64>, f64)> = None;
        for _ in 0..60 {
            let sigma = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
            let sigma = if sigma.is_finite() && sigma > lo.0 && sigma < hi.0 { sigma } else { 0.5 * (lo.0 + hi.0) };
            let guess = &ua + (&ub - &ua) * (sigma / len);
            let corr = self.correct_on_line(&a.corr.orbit, dir, sigma, guess.as_slice(), regularized)?;
            let tangent = self.orient(&corr, &a.tangent);
            let f = monitor.value(self, &corr, &tangent);
            let done = f == 0.0 || (hi.0 - lo.0) < 1e-12 * (1.0 + len) || f.abs() < 1e-12;
            best = Some((corr, tangent, a.s + sigma));
            if done {
                break;
            }
            if f * lo.1 > 0.0 {
                lo = (sigma, f);
                if side == -1 {
                    hi.1 *= 0.5;
                }
                side = -1;
            } else {
                hi = (sigma, f);
                if side == 1 {
                    lo.1 *= 0.5;
                }
                side = 1;
            }
        }
        best.ok_or(Error::Degenerate("empty bracket"))
    }
}

fn level_i8(l: f64) -> i8 {
    l as i8
}

/// Trace a family from a converged member in the given direction of `C`.
pub fn continue_family(
    params: &SystemParams,
    name: &str,
    seed: &PeriodicOrbit,
    heading: Heading,
    opts: &ContinuationOptions,
) -> Result<FamilyRecord> {
    march(params, name, seed, Orientation::Heading(heading), opts)
}

/// Continues a branch born at a bifurcation, marching away from the branch
/// point `base` (in the space of unknowns) regardless of the sign of `dC/ds`.
pub fn continue_branch(
    params: &SystemParams,
    name: &str,
    seed: &PeriodicOrbit,
    base: &[f64],
    opts: &ContinuationOptions,
) -> Result<FamilyRecord> {
    march(params, name, seed, Orientation::Away(DVector::from_column_slice(base)), opts)
}

enum Orientation {
    Heading(Heading),
    Away(DVector<f64>),
}

fn march(
    params: &SystemParams,
    name: &str,
    seed: &PeriodicOrbit,
    orientation: Orientation,
    opts: &ContinuationOptions,
) -> Result<FamilyRecord> {
    let st = Stepper { params, opts };
    let regularized = seed.collision;
    let first = {
        let u = seed.unknowns();
        let co = st.corrector(time_hint(seed), regularized);
        correct(params, seed.kind, &u, &Constraint::FixedC(seed.c), &co)?
    };
    let mut tangent = first.tangent(None).ok_or(Error::Degenerate("no family tangent at the seed"))?;
    let flip = match &orientation {
        Orientation::Heading(h) => first.grad_c.dot(&tangent) * h.sign() < 0.0,
        Orientation::Away(base) => (DVector::from_vec(first.orbit.unknowns()) - base).dot(&tangent) < 0.0,
    };
    if flip {
        tangent = -tangent;
    }
    let early = if opts.detect_events { st.first_crossing_residual(&first.orbit) } else { None };
    let mut nodes = vec![Node { corr: first, s: 0.0, tangent, regularized, early }];
    let mut ds = opts.initial_step;
    let mut previous_u: Option<DVector<f64>> = None;
    let mut cover = None;
    let termination;
    loop {
        if nodes.len() >= opts.limits.max_members {
            termination = Termination::MaxMembers;
            break;
        }
        let head = nodes.last().expect("seed");
        let o = &head.corr.orbit;
        let u = DVector::from_vec(o.unknowns());
        let (q, c) = char_point(o);
        // Secant predictor once two members exist, tangent predictor before.
        let (dir_u, dir_char) = match &previous_u {
            Some(pu) => {
                let du = &u - pu;
                let prev = &nodes[nodes.len() - 2].corr.orbit;
                let (pq, pc) = char_point(prev);
                let len = ((q - pq).powi(2) + (c - pc).powi(2)).sqrt();
                (du / len, ((q - pq) / len, (c - pc) / len))
            }
            None => {
                let t = &head.tangent;
                let dc = head.corr.grad_c.dot(t);
                let len = (t[0] * t[0] + dc * dc).sqrt();
                (t / len, (t[0] / len, dc / len))
            }
        };
        let guess = &u + &dir_u * ds;
        let attempt = st.correct_on_line(o, dir_char, ds, guess.as_slice(), head.regularized);
        let accepted = match attempt {
            Ok(corr) => {
                let (nq, nc) = char_point(&corr.orbit);
                let chord = ((nq - q).powi(2) + (nc - c).powi(2)).sqrt();
                let forward = (&DVector::from_vec(corr.orbit.unknowns()) - &u).dot(&dir_u) > 0.0;
                (chord <= opts.max_step.max(1.5 * ds) && forward && corr.orbit.kind == o.kind).then_some(corr)
            }
            Err(_) => None,
        };
        let Some(corr) = accepted else {
            if ds <= opts.min_step {
                termination =
                    if q.abs() < 1e-4 && dir_char.1 < 0.0 { Termination::Asymptote } else { Termination::Divergence };
                break;
            }
            ds = (ds * 0.5).max(opts.min_step);
            continue;
        };
        if corr.orbit.c < opts.limits.c_min || corr.orbit.c > opts.limits.c_max {
            termination = Termination::Limit;
            break;
        }
        let iterations = corr.iterations;
        let chord = DVector::from_vec(corr.orbit.unknowns()) - &u;
        let tangent = st.orient(&corr, &chord);
        let (nq, nc) = char_point(&corr.orbit);
        let s = head.s + ((nq - q).powi(2) + (nc - c).powi(2)).sqrt();
        let r_min = corr.orbit.r_min;
        let reg = if head.regularized { r_min < 2.0 * opts.corrector.regularize_below } else { corr.orbit.collision };
        previous_u = Some(u);
        let early = if opts.detect_events { st.first_crossing_residual(&corr.orbit) } else { None };
        let head_early = head.early;
        nodes.push(Node { corr, s, tangent, regularized: reg, early });
        if let (Some(x), Some(y)) = (head_early, early) {
            if x * y < 0.0 {
                // The family runs into a multiple cover of a shorter orbit,
                // where it meets that orbit's family.
                let n = nodes.len();
                if let Ok((hit, hit_tangent, hit_s)) = st.refine(&nodes[n - 2], &nodes[n - 1], Monitor::FirstCrossing) {
                    let shot = st.first_crossing_time(&hit.orbit);
                    if let Some(t1) = shot {
                        cover = Some((hit.orbit.period / (2.0 * t1)).round() as usize);
                    }
                    nodes.pop();
                    nodes.push(Node { corr: hit, s: hit_s, tangent: hit_tangent, regularized: reg, early: Some(0.0) });
                    termination = Termination::Cover;
                    break;
                }
            }
        }
        if iterations <= 3 {
            ds = (ds * 1.5).min(opts.max_step);
        } else if iterations >= 8 {
            ds = (ds * 0.5).max(opts.min_step);
        }
    }

    let mut record = FamilyRecord {
        name: name.to_string(),
        mu: params.mu,
        members: Vec::new(),
        arclength: Vec::new(),
        events: Vec::new(),
        termination,
    };
    if !opts.detect_events {
        for n in nodes {
            record.arclength.push(n.s);
            record.members.push(n.corr.orbit);
        }
        return Ok(record);
    }
    build_events(&st, nodes, &mut record)?;
    if termination == Termination::Cover {
        let last = record.members.len() - 1;
        let k = cover.map_or_else(|| "multiple".to_string(), |k| format!("{k}-fold"));
        record.events.push(Event {
            kind: EventKind::Bifurcation,
            c: record.members[last].c,
            detail: format!("member is a {k} cover of a shorter periodic orbit"),
            member: last,
        });
    }
    if termination == Termination::Asymptote {
        let last = record.members.len() - 1;
        record.events.push(Event {
            kind: EventKind::TerminationAsymptote,
            c: record.members[last].c,
            detail: format!("x0 = {:e} with C decreasing at the minimum step", record.members[last].unknowns()[0]),
            member: last,
        });
    }
    Ok(record)
}

fn monitors(kind: OrbitKind) -> Vec<(Monitor, EventKind, String)> {
    let mut m = Vec::new();
    for l in [2.0, -2.0] {
        m.push((Monitor::Ah(l), EventKind::AhCritical(level_i8(l)), format!("a_h = a + d crosses {l:+}")));
    }
    if matches!(kind, OrbitKind::Symmetric(_)) {
        for l in [1.0, -1.0] {
            m.push((Monitor::HalfA(l), EventKind::AhCritical(level_i8(l)), format!("half-map a crosses {l:+}")));
        }
    }
    for l in [2.0, -2.0, 1.0, -1.0] {
        m.push((Monitor::Av(l), EventKind::AvCritical(level_i8(l)), format!("a_v crosses {l:+}")));
    }
    m.push((Monitor::DcDs, EventKind::TurningPoint, "dC/ds changes sign".to_string()));
    m
}

struct Pending {
    s: f64,
    corr: Correction,
    kind: EventKind,
    detail: String,
}

fn build_events(st: &Stepper<'_>, nodes: Vec<Node>, record: &mut FamilyRecord) -> Result<()> {
    let mut inserted: Vec<Vec<Pending>> = (0..nodes.len()).map(|_| Vec::new()).collect();
    for k in 0..nodes.len().saturating_sub(1) {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        if a.corr.orbit.kind != b.corr.orbit.kind {
            continue;
        }
        let mut found: Vec<Pending> = Vec::new();
        for (mon, kind, detail) in monitors(a.corr.orbit.kind) {
            let fa = mon.value(st, &a.corr, &a.tangent);
            let fb = mon.value(st, &b.corr, &b.tangent);
            let product = fa * fb;
            if product.is_nan() || product >= 0.0 {
                continue;
            }
            let Ok((corr, _, s)) = st.refine(a, b, mon) else { continue };
            let heading = if b.corr.orbit.c < a.corr.orbit.c { "decreasing" } else { "increasing" };
            found.push(Pending { s, corr, kind, detail: format!("{detail} ({heading} C)") });
        }
        // Unit-multiplier crossings away from a fold and all period-doubling
        // crossings are bifurcations.
        let fold_near = |j: usize| -> bool {
            let lo = j.saturating_sub(1);
            let hi = (j + 2).min(nodes.len() - 1);
            (lo..hi).any(|i| {
                let x = dc_ds(&nodes[i].corr, &nodes[i].tangent);
                let y = dc_ds(&nodes[i + 1].corr, &nodes[i + 1].tangent);
                x * y < 0.0
            })
        };
        let mut extra = Vec::new();
        for p in &found {
            let EventKind::AhCritical(level) = p.kind else { continue };
            if !p.detail.starts_with("a_h") {
                continue;
            }
            if level == -2 {
                extra.push(Pending {
                    s: p.s,
                    corr: p.corr.clone(),
                    kind: EventKind::Bifurcation,
                    detail: "period doubling: multiplier pair through -1".into(),
                });
            } else if level == 2 && !fold_near(k) {
                extra.push(Pending {
                    s: p.s,
                    corr: p.corr.clone(),
                    kind: EventKind::Bifurcation,
                    detail: "multiplier pair through +1 away from a turning point".into(),
                });
            }
        }
        found.extend(extra);
        found.sort_by(|x, y| x.s.total_cmp(&y.s));
        inserted[k] = found;
    }
    // Collisions: local minima of r_min below the threshold.
    let r = |i: usize| nodes[i].corr.orbit.r_min;
    let collisions: Vec<bool> = (0..nodes.len())
        .map(|k| {
            k > 0 && k + 1 < nodes.len() && r(k) < st.opts.collision_radius && r(k) <= r(k - 1) && r(k) <= r(k + 1)
        })
        .collect();
    for (k, node) in nodes.into_iter().enumerate() {
        let idx = record.members.len();
        if collisions[k] {
            record.events.push(Event {
                kind: EventKind::Collision,
                c: node.corr.orbit.c,
                detail: format!("minimum distance to the tertiary {:e}", node.corr.orbit.r_min),
                member: idx,
            });
        }
        record.members.push(node.corr.orbit);
        record.arclength.push(node.s);
        for p in std::mem::take(&mut inserted[k]) {
            let last_s = *record.arclength.last().expect("member");
            let member = if (p.s - last_s).abs() < 1e-10 && record.members.len() > idx + 1 {
                record.members.len() - 1
            } else {
                record.members.push(p.corr.orbit);
                record.arclength.push(p.s);
                record.members.len() - 1
            };
            record.events.push(Event { kind: p.kind, c: record.members[member].c, detail: p.detail, member });
        }
    }
    Ok(())
}

/// Re-refine a stability or turning-point event by bisection between the
/// members adjacent to it and return the Jacobi constant found.
pub fn refine_event(
    params: &SystemParams,
    record: &FamilyRecord,
    event: usize,
    opts: &ContinuationOptions,
) -> Result<f64> {
    let ev = record.events.get(event).ok_or_else(|| Error::InvalidArgument(format!("no event {event}")))?;
    let (mon, _, _) = monitors(record.members[ev.member].kind)
        .into_iter()
        .find(|(_, k, d)| *k == ev.kind && ev.detail.starts_with(d.as_str()))
        .ok_or_else(|| Error::InvalidArgument(format!("event {} cannot be refined", ev.kind)))?;
    if ev.member == 0 || ev.member + 1 >= record.members.len() {
        return Err(Error::InvalidArgument("event at the end of the record".into()));
    }
    let st = Stepper { params, opts };
    let node = |i: usize, along: Option<&DVector<f64>>| -> Result<Node> {
        let o = &record.members[i];
        let co = st.corrector(time_hint(o), o.collision);
        let corr = correct(params, o.kind, &o.unknowns(), &Constraint::FixedC(o.c), &co)?;
        let next = &record.members[(i + 1).min(record.members.len() - 1)];
        let fwd = DVector::from_vec(next.unknowns()) - DVector::from_vec(o.unknowns());
        let t = st.orient(&corr, along.unwrap_or(&fwd));
        Ok(Node { corr, s: record.arclength[i], tangent: t, regularized: o.collision, early: None })
    };
    let a = node(ev.member - 1, None)?;
    let b = node(ev.member + 1, Some(&a.tangent))?;
    Ok(st.refine(&a, &b, mon)?.0.orbit.c)
}

/// Unknowns of a symmetric orbit restarted from its other perpendicular
/// crossing, half a period later.
fn opposite_unknowns(params: &SystemParams, opts: &CorrectorOptions, o: &PeriodicOrbit) -> Result<Vec<f64>> {
    let OrbitKind::Symmetric(section) = o.kind else {
        return Err(Error::Degenerate("asymmetric orbits have no opposite crossing"));
    };
    let s = crate::periodic::state_after(params, &opts.integrator, o, o.period / 2.0)?.planar_array();
    Ok(vec![s[section.axis_index()], s[section.perpendicular_velocity_index()]])
}

/// Orbits on the branches leaving a bifurcation, sorted by decreasing first
/// unknown, and the parent orbit they leave from in the same unknowns.
#[derive(Debug, Clone)]
pub struct Branches {
    pub base: Vec<f64>,
    pub orbits: Vec<PeriodicOrbit>,
}

/// Members of new branches born at a bifurcation event, found by stepping
/// off the parent family along the level set of C and correcting on a line
/// parallel to the parent tangent. A period-doubling event yields orbits closing after twice the
/// parent's period. Of the two perpendicular crossings of the parent, the
/// one where the shooting Jacobian nearly vanishes is used as the base.
pub fn branch_switch(
    params: &SystemParams,
    record: &FamilyRecord,
    event: usize,
    opts: &ContinuationOptions,
) -> Result<Branches> {
    let ev = record.events.get(event).ok_or_else(|| Error::InvalidArgument(format!("no event {event}")))?;
    if ev.kind != EventKind::Bifurcation {
        return Err(Error::InvalidArgument(format!("event {} is not a bifurcation", ev.kind)));
    }
    let parent = &record.members[ev.member];
    if parent.kind == OrbitKind::Asymmetric {
        return Err(Error::BranchNotFound("branch switching needs a symmetric parent".into()));
    }
    if ev.member == 0 || ev.member + 1 >= record.members.len() {
        return Err(Error::Degenerate("bifurcation member has no neighbours"));
    }
    let doubling = ev.detail.contains("period doubling");
    let hint = if doubling { parent.period } else { time_hint(parent) };
    let co = CorrectorOptions { time_hint: Some(hint), force_regularized: parent.collision, ..opts.corrector.clone() };
    let (lo, hi) = (&record.members[ev.member - 1], &record.members[ev.member + 1]);
    let mut bases = Vec::new();
    for opposite in [false, true] {
        let pick = |o: &PeriodicOrbit| if opposite { opposite_unknowns(params, &co, o) } else { Ok(o.unknowns()) };
        let (Ok(ub), Ok(ulo), Ok(uhi)) = (pick(parent), pick(lo), pick(hi)) else { continue };
        let Ok(corr) = correct(params, parent.kind, &ub, &Constraint::FixedC(parent.c), &co) else { continue };
        // The shooting Jacobian degenerates at a branch point, so the
        // parent direction comes from the neighbouring members instead.
        let t = DVector::from_vec(uhi) - DVector::from_vec(ulo);
        if t.norm() > 0.0 {
            let g = &corr.grad_c;
            bases.push((
                corr.jacobian.norm(),
                DVector::from_vec(corr.orbit.unknowns()),
                t.normalize(),
                DVector::from_vec(vec![-g[1], g[0]]),
            ));
        }
    }
    bases.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (_, ub, t, level) =
        bases.into_iter().next().ok_or(Error::BranchNotFound(format!("parent lost at C = {}", ev.c)))?;
    let normal = DVector::from_vec(vec![-t[1], t[0]]);
    // Both the mirror pitchfork and period doubling are symmetric in the
    // branch amplitude, so the new branch leaves tangent to the level set of C.
    let dir = if level.norm() > 0.0 { level.normalize() } else { normal.clone() };
    let scale = 1.0 + ub.amax();
    let mut out: Vec<PeriodicOrbit> = Vec::new();
    for sign in [1.0, -1.0] {
        for delta in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
            let step = sign * delta;
            // Correct on a line parallel to the parent tangent, which the
            // parent itself does not cross near the branch point.
            let guess = &ub + &dir * step;
            let offset = step * dir.dot(&normal);
            let con = Constraint::Arclength {
                base: ub.as_slice().to_vec(),
                tangent: normal.as_slice().to_vec(),
                step: offset,
            };
            let r = correct(params, parent.kind, guess.as_slice(), &con, &co);
            let Ok(c) = r else { continue };
            let u = DVector::from_vec(c.orbit.unknowns());
            // Stay local: far-away solutions on the same line belong to
            // other parts of the parent or to unrelated families.
            if (&u - &ub).norm() > 0.1 * scale || (c.orbit.c - parent.c).abs() > 0.05 {
                continue;
            }
            if doubling
                && ((c.orbit.period - 2.0 * parent.period).abs() > 0.1 * parent.period
                    || is_double_cover(params, &c.orbit, &co))
            {
                continue;
            }
            out.push(c.orbit);
            break;
        }
    }
    if out.is_empty() {
        return Err(Error::BranchNotFound(format!("no branch at C = {}", ev.c)));
    }
    out.sort_by(|a, b| b.unknowns()[0].total_cmp(&a.unknowns()[0]));
    Ok(Branches { base: ub.as_slice().to_vec(), orbits: out })
}

/// Members of a family at prescribed Jacobi constants, reached from `seed`
/// by natural continuation in `C` with secant predictions. The targets are
/// visited in order and each is hit to rounding level.
pub fn members_at(
    params: &SystemParams,
    seed: &PeriodicOrbit,
    targets: &[f64],
    opts: &CorrectorOptions,
) -> Result<Vec<PeriodicOrbit>> {
    const FIRST_STEP: f64 = 1e-4;
    const MAX_STEP: f64 = 0.5;
    const MIN_STEP: f64 = 1e-10;
    let mut current = *seed;
    let mut previous: Option<PeriodicOrbit> = None;
    let mut step = FIRST_STEP;
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        let mut reached = current.c == target;
        while !reached {
            let last = step >= (target - current.c).abs();
            let c_next = if last { target } else { current.c + (target - current.c).signum() * step };
            let u = current.unknowns();
            let guess: Vec<f64> = match &previous {
                Some(p) if p.c != current.c => {
                    let slope = (c_next - current.c) / (current.c - p.c);
                    u.iter().zip(p.unknowns()).map(|(a, b)| a + (a - b) * slope).collect()
                }
                _ => u,
            };
            let hint = match current.kind {
                OrbitKind::Symmetric(_) => current.period / 2.0,
                OrbitKind::Asymmetric => current.period,
            };
            let local = CorrectorOptions { time_hint: Some(hint), ..opts.clone() };
            match correct(params, current.kind, &guess, &Constraint::FixedC(c_next), &local) {
                Ok(corr) => {
                    previous = Some(std::mem::replace(&mut current, corr.orbit));
                    step = (step * 1.5).min(MAX_STEP);
                    reached = last;
                }
                Err(e) => {
                    step /= 3.0;
                    if step < MIN_STEP {
                        return Err(e);
                    }
                }
            }
        }
        out.push(current);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sj() -> SystemParams {
        SystemParams::new(0.00095).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for f in FamilySeed::ALL {
            assert_eq!(f.name().parse::<FamilySeed>().unwrap(), f);
            assert_eq!(f.to_string(), f.name());
        }
        assert!("h".parse::<FamilySeed>().is_err());
    }

    #[test]
    fn f_seed_is_bistable() {
        let o = seed_family(&sj(), FamilySeed::F).unwrap();
        assert!(o.ah.abs() < 2.0 && o.av.abs() < 2.0);
        assert!((o.ic.x - 0.01).abs() < 1e-3);
    }

    #[test]
    fn short_seed_has_linear_period() {
        let o = seed_family(&sj(), FamilySeed::Short).unwrap();
        assert!((o.period - 6.35271).abs() < 1e-3, "{}", o.period);
    }

    #[test]
    fn g_seed_converges_in_hill_limit() {
        let o = seed_family(&SystemParams::hill(), FamilySeed::G).unwrap();
        assert!((o.ic.x - 0.01).abs() < 1e-4);
        assert!(o.ah.abs() < 2.0);
    }

    #[test]
    fn f_family_is_monotone_and_bistable() {
        let p = sj();
        let seed = seed_family(&p, FamilySeed::F).unwrap();
        let opts = ContinuationOptions {
            limits: Limits { c_min: seed.c - 20.0, c_max: 1e3, max_members: 40 },
            ..Default::default()
        };
        let rec = continue_family(&p, "f", &seed, Heading::DecreasingC, &opts).unwrap();
        assert_eq!(rec.members.len(), 40);
        assert!(rec.members.windows(2).all(|w| w[1].c < w[0].c));
        assert!(rec.members.iter().all(|o| o.ah.abs() < 2.0 && o.av.abs() < 2.0));
        assert!(rec.events.is_empty());
    }
}
