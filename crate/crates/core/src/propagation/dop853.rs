//! Explicit Runge-Kutta 8(5,3) with step-size control and a seventh-order
//! continuous extension, plus event location on top of it.

#![allow(clippy::needless_range_loop)]

use super::tableau::{A, C, D, E3, E5};
use super::IntegratorConfig;
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// A first-order system `y' = f(t, y)` on `R^N`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) -> Result<()>;

    /// Called on every accepted step; lets a system abort the integration,
    /// e.g. on a close approach.
    fn check(&self, _t: f64, _y: &[f64; N]) -> Result<()> {
        Ok(())
    }
}

/// Which sign changes of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Either,
}

impl Direction {
    fn accepts(self, g0: f64, g1: f64) -> bool {
        let up = g0 < 0.0 && g1 >= 0.0;
        let down = g0 > 0.0 && g1 <= 0.0;
        match self {
            Direction::Increasing => up,
            Direction::Decreasing => down,
            Direction::Either => up || down,
        }
    }
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t_old: f64,
    pub t_new: f64,
    y_old: [f64; N],
    coeffs: [[f64; N]; 7],
}

impl<const N: usize> DenseSegment<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t_new - self.t_old;
        let x = (t - self.t_old) / h;
        let mut y = [0.0; N];
        for (i, f) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for j in 0..N {
                y[j] = (y[j] + f[j]) * w;
            }
        }
        for j in 0..N {
            y[j] += self.y_old[j];
        }
        y
    }

    pub fn y_old(&self) -> &[f64; N] {
        &self.y_old
    }

    /// Right-hand side at the start of the segment, recovered from the
    /// interpolation coefficients.
    pub fn f_old(&self) -> [f64; N] {
        let h = self.t_new - self.t_old;
        std::array::from_fn(|j| (self.coeffs[0][j] + self.coeffs[1][j]) / h)
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_old <= self.t_new { (self.t_old, self.t_new) } else { (self.t_new, self.t_old) };
        t >= lo && t <= hi
    }
}

pub struct Dop853<'a, const N: usize, S: OdeSystem<N>> {
    sys: &'a S,
    rtol: f64,
    atol: f64,
    max_step: f64,
    max_steps: usize,
    pub t: f64,
    pub y: [f64; N],
    f: [f64; N],
    t_old: f64,
    y_old: [f64; N],
    h_abs: f64,
    h_prev: f64,
    direction: f64,
    k: Box<[[f64; N]; 16]>,
    dense_ready: bool,
    steps: usize,
}

impl<'a, const N: usize, S: OdeSystem<N>> Dop853<'a, N, S> {
    /// `direction` is `+1` or `−1`.
    pub fn new(sys: &'a S, cfg: &IntegratorConfig, t0: f64, y0: [f64; N], direction: f64) -> Result<Self> {
        let mut f = [0.0; N];
        sys.rhs(t0, &y0, &mut f)?;
        let mut me = Dop853 {
            sys,
            rtol: cfg.rel_tol,
            atol: cfg.abs_tol,
            max_step: cfg.max_step,
            max_steps: cfg.max_steps,
            t: t0,
            y: y0,
            f,
            t_old: t0,
            y_old: y0,
            h_abs: 0.0,
            h_prev: 0.0,
            direction: direction.signum(),
            k: Box::new([[0.0; N]; 16]),
            dense_ready: false,
            steps: 0,
        };
        me.h_abs = me.initial_step()?;
        Ok(me)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + a.abs().max(b.abs()) * self.rtol
    }

    fn initial_step(&self) -> Result<f64> {
        let rms =
            |v: &[f64; N], s: &[f64; N]| (v.iter().zip(s).map(|(a, b)| (a / b).powi(2)).sum::<f64>() / N as f64).sqrt();
        let scale: [f64; N] = std::array::from_fn(|i| self.scale(self.y[i], 0.0));
        let d0 = rms(&self.y, &scale);
        let d1 = rms(&self.f, &scale);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: [f64; N] = std::array::from_fn(|i| self.y[i] + h0 * self.direction * self.f[i]);
        let mut f1 = [0.0; N];
        self.sys.rhs(self.t + h0 * self.direction, &y1, &mut f1)?;
        let df: [f64; N] = std::array::from_fn(|i| f1[i] - self.f[i]);
        let d2 = rms(&df, &scale) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 8.0) };
        Ok((100.0 * h0).min(h1).min(self.max_step))
    }

    /// One Runge-Kutta step of size `h` from `(t, y)` with `f = f(t, y)`;
    /// fills the first 13 stages.
    fn rk_step(sys: &S, k: &mut [[f64; N]; 16], t: f64, y: &[f64; N], f: &[f64; N], h: f64) -> Result<[f64; N]> {
        k[0] = *f;
        let mut ys = [0.0; N];
        for s in 1..12 {
            for j in 0..N {
                let mut acc = 0.0;
                for (m, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[m][j];
                }
                ys[j] = y[j] + h * acc;
            }
            sys.rhs(t + C[s] * h, &ys, &mut k[s])?;
        }
        let mut y_new = [0.0; N];
        for j in 0..N {
            let mut acc = 0.0;
            for m in 0..12 {
                acc += A[12][m] * k[m][j];
            }
            y_new[j] = y[j] + h * acc;
        }
        Ok(y_new)
    }

    /// One unchecked step from an arbitrary point, used to land exactly on
    /// event times.
    pub fn single_step(sys: &S, t: f64, y: &[f64; N], f: &[f64; N], h: f64) -> Result<[f64; N]> {
        if h == 0.0 {
            return Ok(*y);
        }
        let mut k = Box::new([[0.0; N]; 16]);
        Self::rk_step(sys, &mut k, t, y, f, h)
    }

    /// Take one accepted step, never passing `t_bound`.
    pub fn step(&mut self, t_bound: f64) -> Result<()> {
        if self.steps >= self.max_steps {
            return Err(Error::TooManySteps(self.max_steps));
        }
        let min_step = 10.0 * (self.t.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
        let mut h_abs = self.h_abs.min(self.max_step).max(min_step);
        let mut rejected = false;
        loop {
            if h_abs < min_step {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let mut t_new = self.t + h_abs * self.direction;
            if self.direction * (t_new - t_bound) > 0.0 {
                t_new = t_bound;
            }
            let h = t_new - self.t;
            h_abs = h.abs();
            let y_new = Self::rk_step(self.sys, &mut self.k, self.t, &self.y, &self.f, h)?;
            let mut f_new = [0.0; N];
            self.sys.rhs(t_new, &y_new, &mut f_new)?;
            self.k[12] = f_new;

            let (mut e5, mut e3) = (0.0, 0.0);
            for j in 0..N {
                let sc = self.scale(self.y[j], y_new[j]);
                let (mut a5, mut a3) = (0.0, 0.0);
                for m in 0..13 {
                    a5 += E5[m] * self.k[m][j];
                    a3 += E3[m] * self.k[m][j];
                }
                e5 += (a5 / sc).powi(2);
                e3 += (a3 / sc).powi(2);
            }
            let err = if e5 == 0.0 && e3 == 0.0 { 0.0 } else { h_abs * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt() };
            if !err.is_finite() {
                h_abs *= MIN_FACTOR;
                rejected = true;
                continue;
            }
            if err < 1.0 {
                let mut factor =
                    if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.t_old = self.t;
                self.y_old = self.y;
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                self.h_prev = h;
                self.h_abs = h_abs * factor;
                self.dense_ready = false;
                self.steps += 1;
                self.sys.check(self.t, &self.y)?;
                return Ok(());
            }
            h_abs *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            rejected = true;
        }
    }

    /// Continuous extension over the last accepted step.
    pub fn dense(&mut self) -> Result<DenseSegment<N>> {
        let h = self.h_prev;
        if !self.dense_ready {
            let mut ys = [0.0; N];
            for s in 13..16 {
                for j in 0..N {
                    let mut acc = 0.0;
                    for (m, a) in A[s][..s].iter().enumerate() {
                        acc += a * self.k[m][j];
                    }
                    ys[j] = self.y_old[j] + h * acc;
                }
                let mut out = [0.0; N];
                self.sys.rhs(self.t_old + C[s] * h, &ys, &mut out)?;
                self.k[s] = out;
            }
            self.dense_ready = true;
        }
        let mut coeffs = [[0.0; N]; 7];
        for j in 0..N {
            let dy = self.y[j] - self.y_old[j];
            coeffs[0][j] = dy;
            coeffs[1][j] = h * self.k[0][j] - dy;
            coeffs[2][j] = 2.0 * dy - h * (self.f[j] + self.k[0][j]);
            for r in 0..4 {
                let mut acc = 0.0;
                for m in 0..16 {
                    acc += D[r][m] * self.k[m][j];
                }
                coeffs[3 + r][j] = h * acc;
            }
        }
        Ok(DenseSegment { t_old: self.t_old, t_new: self.t, y_old: self.y_old, coeffs })
    }

    /// Integrate to `t_final` exactly.
    pub fn run_to(&mut self, t_final: f64) -> Result<()> {
        while self.direction * (t_final - self.t) > 0.0 {
            self.step(t_final)?;
        }
        Ok(())
    }

    /// Step until `g` changes sign in `direction` at a time at least
    /// `min_advance` past `t_start`, or until `t_limit`. On success the
    /// integrator stays at the end of the step containing the event, so the
    /// search can be resumed for the next one.
    pub fn advance_to_event(
        &mut self,
        g: &dyn Fn(&[f64; N]) -> f64,
        direction: Direction,
        t_start: f64,
        min_advance: f64,
        t_limit: f64,
    ) -> Result<Option<(f64, [f64; N])>> {
        let mut g_old = g(&self.y);
        while self.direction * (t_limit - self.t) > 0.0 {
            self.step(t_limit)?;
            let g_new = g(&self.y);
            if direction.accepts(g_old, g_new) {
                let seg = self.dense()?;
                let (te, ye) = locate_root(self.sys, &seg, g, g_old, g_new)?;
                if self.direction * (te - t_start) > min_advance {
                    return Ok(Some((te, ye)));
                }
            }
            g_old = g_new;
        }
        Ok(None)
    }
}

/// Root of `g` inside a dense segment where it changes sign, refined on the
/// interpolant and then polished with exact Runge-Kutta steps from the start
/// of the segment.
pub fn locate_root<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    seg: &DenseSegment<N>,
    g: &dyn Fn(&[f64; N]) -> f64,
    g0: f64,
    g1: f64,
) -> Result<(f64, [f64; N])> {
    let (mut a, mut b) = (seg.t_old, seg.t_new);
    let (mut ga, mut gb) = (g0, g1);
    let mut c = b;
    if gb != 0.0 {
        // Illinois variant of regula falsi.
        let mut side = 0;
        for _ in 0..200 {
            c = (a * gb - b * ga) / (gb - ga);
            let gc = g(&seg.eval(c));
            if gc == 0.0 {
                break;
            }
            if gc.signum() == gb.signum() {
                b = c;
                gb = gc;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                ga = gc;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            }
            if (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
                break;
            }
        }
    }
    let mut t = c;
    let f_old = seg.f_old();
    let span = (seg.t_new - seg.t_old).abs();
    let mut y = Dop853::<N, S>::single_step(sys, seg.t_old, seg.y_old(), &f_old, t - seg.t_old)?;
    for _ in 0..3 {
        let gv = g(&y);
        let mut f = [0.0; N];
        sys.rhs(t, &y, &mut f)?;
        let dt = 1e-6 * span.max(1e-12);
        let yp: [f64; N] = std::array::from_fn(|j| y[j] + dt * f[j]);
        let ym: [f64; N] = std::array::from_fn(|j| y[j] - dt * f[j]);
        let dg = (g(&yp) - g(&ym)) / (2.0 * dt);
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let delta = gv / dg;
        if delta.abs() > span {
            break;
        }
        t -= delta;
        y = Dop853::<N, S>::single_step(sys, seg.t_old, seg.y_old(), &f_old, t - seg.t_old)?;
        if delta.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    Ok((t, y))
}
