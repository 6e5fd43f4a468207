//! Adaptive Runge-Kutta-Fehlberg 4(5) integration with dense output and
//! event location.
//!
//! The embedded pair is Fehlberg's original one; steps are accepted when the
//! mixed componentwise error `|err_i| / (atol + rtol * max(|y_i|, |y_i'|))`
//! is at most one in the max norm, and the solution is advanced with the
//! fifth-order member. Runs that stop early (norm guard, step underflow,
//! exhausted budget) still return their trajectory; the reason is recorded in
//! [`Trajectory::status`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots;

/// A first-order system `y' = f(t, y)` of fixed dimension.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);

    /// `scale * rhs(t, y)`. Systems whose raw field can overflow where the
    /// scaled one cannot override this to fold `scale` in early.
    fn rhs_scaled(&self, t: f64, y: &[f64], scale: f64, dydt: &mut [f64]) {
        self.rhs(t, y, dydt);
        dydt.iter_mut().for_each(|v| *v *= scale);
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (**self).rhs(t, y, dydt)
    }
    fn rhs_scaled(&self, t: f64, y: &[f64], scale: f64, dydt: &mut [f64]) {
        (**self).rhs_scaled(t, y, scale, dydt)
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.f)(t, y, dydt)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state is not finite")]
    NonFiniteInitialState,
    #[error("initial state has dimension {got}, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty time interval [{t0}, {t1}]")]
    EmptyInterval { t0: f64, t1: f64 },
    #[error("step budget exhausted at t = {t}")]
    StepBudgetExhausted { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("state norm exceeded the divergence threshold at t = {t}")]
    Diverged { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Integration stops once `max |y_i|` exceeds this value.
    pub divergence_norm: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: 1.0,
            max_steps: 5_000_000,
            divergence_norm: 1e6,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegratorConfig { rtol, atol, ..Default::default() }
    }

    /// Same configuration with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        IntegratorConfig { rtol: self.rtol / factor, atol: self.atol / factor, ..*self }
    }

    pub fn without_divergence_guard(&self) -> Self {
        IntegratorConfig { divergence_norm: f64::INFINITY, ..*self }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidConfig(m.to_string()));
        if !(self.rtol > 0.0) {
            return bad("rtol must be positive");
        }
        if !(self.atol > 0.0) {
            return bad("atol must be positive");
        }
        if !(self.h_min > 0.0) || !(self.h_min <= self.h_max) {
            return bad("step bounds must satisfy 0 < h_min <= h_max");
        }
        if !(self.h_init > 0.0) {
            return bad("h_init must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.divergence_norm > 0.0) {
            return bad("divergence_norm must be positive");
        }
        Ok(())
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the requested final time.
    Completed,
    /// A terminal event fired at the final recorded time.
    Event,
    /// `max |y_i|` exceeded `divergence_norm`; the last recorded state is
    /// the first one past the threshold.
    NormExceeded,
    /// The controller asked for a step below `h_min`.
    StepUnderflow,
    /// `max_steps` attempts were used up.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub last_step: f64,
}

/// Time-stamped states of an adaptive run.
///
/// Derivatives at every stored point are kept alongside the states so that a
/// continuous extension can be rebuilt for any step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    pub times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    pub stats: StepStats,
    pub status: Termination,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
            stats: StepStats::default(),
            status: Termination::Completed,
        }
    }

    fn push(&mut self, t: f64, y: &[f64], f: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(f);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial point")
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Converts an early stop into the corresponding error.
    pub fn check(&self) -> Result<&Self, IntegratorError> {
        let t = self.last_time();
        match self.status {
            Termination::Completed | Termination::Event => Ok(self),
            Termination::NormExceeded => Err(IntegratorError::Diverged { t }),
            Termination::StepUnderflow => Err(IntegratorError::StepSizeUnderflow { t }),
            Termination::BudgetExhausted => Err(IntegratorError::StepBudgetExhausted { t }),
        }
    }

    /// Index `i` of the step `[t_i, t_{i+1}]` containing `t`.
    fn segment(&self, t: f64) -> Option<usize> {
        let n = self.len();
        if n < 2 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        Some(i.saturating_sub(1).min(n - 2))
    }

    /// Dense output at `t` from the quartic continuous extension of the step
    /// containing `t`. `sys` must be the system that produced the trajectory.
    pub fn interpolate<S: OdeSystem + ?Sized>(&self, sys: &S, t: f64) -> Option<Vec<f64>> {
        let i = self.segment(t)?;
        let seg = DenseSegment::build(
            sys,
            self.times[i],
            self.state(i),
            self.derivative(i),
            self.times[i + 1],
            self.state(i + 1),
            self.derivative(i + 1),
        );
        let mut out = vec![0.0; self.dim];
        seg.eval(t, &mut out);
        Some(out)
    }

    /// `int f(y(t)) dt` over the whole trajectory for a scalar observable
    /// `f` with known time derivative along the flow, using the cubic
    /// Hermite rule on each step (exact for cubics).
    pub fn integrate_observable<F, G>(&self, value: F, rate: G) -> f64
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64], &[f64]) -> f64,
    {
        let mut total = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            let h = self.times[i + 1] - self.times[i];
            let (y0, y1) = (self.state(i), self.state(i + 1));
            let (v0, v1) = (value(y0), value(y1));
            let (r0, r1) = (rate(y0, self.derivative(i)), rate(y1, self.derivative(i + 1)));
            total += 0.5 * h * (v0 + v1) + h * h * (r0 - r1) / 12.0;
        }
        total
    }
}

// Fehlberg coefficients.
const C2: f64 = 1.0 / 4.0;
const C3: f64 = 3.0 / 8.0;
const C4: f64 = 12.0 / 13.0;
const C6: f64 = 1.0 / 2.0;
const A21: f64 = 1.0 / 4.0;
const A31: f64 = 3.0 / 32.0;
const A32: f64 = 9.0 / 32.0;
const A41: f64 = 1932.0 / 2197.0;
const A42: f64 = -7200.0 / 2197.0;
const A43: f64 = 7296.0 / 2197.0;
const A51: f64 = 439.0 / 216.0;
const A52: f64 = -8.0;
const A53: f64 = 3680.0 / 513.0;
const A54: f64 = -845.0 / 4104.0;
const A61: f64 = -8.0 / 27.0;
const A62: f64 = 2.0;
const A63: f64 = -3544.0 / 2565.0;
const A64: f64 = 1859.0 / 4104.0;
const A65: f64 = -11.0 / 40.0;
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

/// Which member of the embedded pair advances a fixed-step solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMember {
    Fourth,
    Fifth,
}

/// Scratch space for one RKF45 step.
struct Stages {
    k: [Vec<f64>; 6],
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    /// Stages 2..6 given `k[0] = f(t, y)`; writes both solutions.
    fn step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        y: &[f64],
        h: f64,
        y5: &mut [f64],
        y4: &mut [f64],
    ) {
        let n = y.len();
        let Stages { k, tmp } = self;
        let [k1, k2, k3, k4, k5, k6] = k;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + h, tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + C6 * h, tmp, k6);
        for i in 0..n {
            let ks = [k1[i], k2[i], k3[i], k4[i], k5[i], k6[i]];
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for j in 0..6 {
                s5 += B5[j] * ks[j];
                s4 += B4[j] * ks[j];
            }
            y5[i] = y[i] + h * s5;
            y4[i] = y[i] + h * s4;
        }
    }
}

/// One Fehlberg step from `(t, y)` with step `h`; returns the fifth- and
/// fourth-order results.
pub fn rkf45_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut st = Stages::new(n);
    sys.rhs(t, y, &mut st.k[0]);
    let (mut y5, mut y4) = (vec![0.0; n], vec![0.0; n]);
    st.step(sys, t, y, h, &mut y5, &mut y4);
    (y5, y4)
}

/// Fixed-step integration with `steps` equal steps advancing the chosen pair
/// member. Used for order verification.
pub fn integrate_fixed<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
    member: PairMember,
) -> Vec<f64> {
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    let (mut y5, mut y4) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        sys.rhs(t, &y, &mut st.k[0]);
        st.step(sys, t, &y, h, &mut y5, &mut y4);
        match member {
            PairMember::Fourth => y.copy_from_slice(&y4),
            PairMember::Fifth => y.copy_from_slice(&y5),
        }
    }
    y
}

/// Quartic continuous extension of one accepted step.
///
/// Interpolates `y0, f0, y1, f1` and a fifth-order midpoint value obtained by
/// an extra half step from the left end, giving an interpolant whose error is
/// `O(h^5)` uniformly on the step.
struct DenseSegment {
    t0: f64,
    h: f64,
    c: [Vec<f64>; 5],
}

impl DenseSegment {
    fn build<S: OdeSystem + ?Sized>(
        sys: &S,
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        t1: f64,
        y1: &[f64],
        f1: &[f64],
    ) -> Self {
        let n = y0.len();
        let h = t1 - t0;
        let mut st = Stages::new(n);
        st.k[0].copy_from_slice(f0);
        let (mut ym, mut scratch) = (vec![0.0; n], vec![0.0; n]);
        st.step(sys, t0, y0, 0.5 * h, &mut ym, &mut scratch);
        let mut c: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let d = y1[i] - y0[i] - h * f0[i];
            let e = h * (f1[i] - f0[i]);
            let g = ym[i] - y0[i] - 0.5 * h * f0[i];
            let c4 = 2.0 * e - 8.0 * d + 16.0 * g;
            let c3 = e - 2.0 * d - 2.0 * c4;
            let c2 = d - c3 - c4;
            c[0][i] = y0[i];
            c[1][i] = h * f0[i];
            c[2][i] = c2;
            c[3][i] = c3;
            c[4][i] = c4;
        }
        DenseSegment { t0, h, c }
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t0) / self.h;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.c[0][i]
                + s * (self.c[1][i] + s * (self.c[2][i] + s * (self.c[3][i] + s * self.c[4][i])));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

type EventFn = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type GuardFn = Box<dyn Fn(f64, &[f64]) -> bool + Send + Sync>;

/// A scalar event function `g(t, y)` whose sign changes are located.
pub struct EventSpec {
    pub g: EventFn,
    pub direction: Direction,
    pub root_tol: f64,
    /// Stop integrating at the first accepted occurrence.
    pub terminal: bool,
    /// Optional condition at the root; occurrences failing it are skipped.
    pub guard: Option<GuardFn>,
}

impl EventSpec {
    pub fn new(g: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static, direction: Direction) -> Self {
        EventSpec { g: Box::new(g), direction, root_tol: 1e-12, terminal: false, guard: None }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn root_tol(mut self, tol: f64) -> Self {
        self.root_tol = tol;
        self
    }

    pub fn guard(mut self, guard: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Box::new(guard));
        self
    }

    fn crossed(&self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// A located event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub index: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub g: f64,
}

pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    integrate_with_events(sys, y0, t0, t1, cfg, &[]).map(|(traj, _)| traj)
}

fn error_norm(y: &[f64], y5: &[f64], y4: &[f64], cfg: &IntegratorConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..y.len() {
        let scale = cfg.atol + cfg.rtol * y[i].abs().max(y5[i].abs());
        let e = (y5[i] - y4[i]).abs() / scale;
        if !e.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(e);
    }
    worst
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Integrates from `t0` towards `t_max`, locating sign changes of each event
/// function on every accepted step.
///
/// A crossing is bracketed across the step, narrowed on the quartic dense
/// output and finally polished against direct Fehlberg steps from the step's
/// left end, so the reported `y` is a fifth-order solution at `t`.
pub fn integrate_with_events<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<(Trajectory, Vec<EventHit>), IntegratorError> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(IntegratorError::DimensionMismatch { expected: n, got: y0.len() });
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(IntegratorError::NonFiniteInitialState);
    }
    if !(t_max > t0) {
        return Err(IntegratorError::EmptyInterval { t0, t1: t_max });
    }

    let mut traj = Trajectory::new(n);
    let mut hits = Vec::new();
    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    sys.rhs(t0, &y, &mut f);
    traj.stats.rhs_evaluations += 1;
    traj.push(t0, &y, &f);
    if max_abs(&y) > cfg.divergence_norm {
        traj.status = Termination::NormExceeded;
        return Ok((traj, hits));
    }

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t0, &y)).collect();
    let (mut y5, mut y4) = (vec![0.0; n], vec![0.0; n]);
    let mut f_new = vec![0.0; n];
    let mut t = t0;
    let span = t_max - t0;
    let mut h = cfg.h_init.min(cfg.h_max).min(span);
    let mut attempts = 0usize;

    loop {
        if attempts >= cfg.max_steps {
            traj.status = Termination::BudgetExhausted;
            break;
        }
        attempts += 1;
        let remaining = t_max - t;
        let last = h >= remaining * (1.0 - 4.0 * f64::EPSILON);
        let h_try = if last { remaining } else { h };

        st.k[0].copy_from_slice(&f);
        st.step(sys, t, &y, h_try, &mut y5, &mut y4);
        traj.stats.rhs_evaluations += 5;
        let err = error_norm(&y, &y5, &y4, cfg);

        if err > 1.0 {
            traj.stats.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h = h_try * factor;
            if h < cfg.h_min {
                traj.status = Termination::StepUnderflow;
                break;
            }
            continue;
        }

        let t_new = if last { t_max } else { t + h_try };
        sys.rhs(t_new, &y5, &mut f_new);
        traj.stats.rhs_evaluations += 1;
        traj.stats.accepted += 1;
        traj.stats.last_step = h_try;

        // events on [t, t_new]
        let mut step_hits: Vec<EventHit> = Vec::new();
        let mut g_new = Vec::with_capacity(events.len());
        let mut seg: Option<DenseSegment> = None;
        for (idx, ev) in events.iter().enumerate() {
            let g1 = (ev.g)(t_new, &y5);
            g_new.push(g1);
            if !ev.crossed(g_prev[idx], g1) {
                continue;
            }
            let seg = seg.get_or_insert_with(|| DenseSegment::build(sys, t, &y, &f, t_new, &y5, &f_new));
            if let Some(hit) = locate_event(sys, ev, idx, seg, t, &y, &f, t_new, &y5, g_prev[idx], g1) {
                if ev.guard.as_ref().is_none_or(|gd| gd(hit.t, &hit.y)) {
                    step_hits.push(hit);
                }
            }
        }
        step_hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        let terminal = step_hits.iter().position(|hit| events[hit.index].terminal);
        if let Some(p) = terminal {
            step_hits.truncate(p + 1);
            let hit = step_hits[p].clone();
            hits.extend(step_hits);
            let mut fh = vec![0.0; n];
            sys.rhs(hit.t, &hit.y, &mut fh);
            if hit.t > t {
                traj.push(hit.t, &hit.y, &fh);
            }
            traj.status = Termination::Event;
            return Ok((traj, hits));
        }
        hits.extend(step_hits);
        g_prev = g_new;

        t = t_new;
        y.copy_from_slice(&y5);
        f.copy_from_slice(&f_new);
        traj.push(t, &y, &f);

        if max_abs(&y) > cfg.divergence_norm {
            traj.status = Termination::NormExceeded;
            break;
        }
        if last {
            traj.status = Termination::Completed;
            break;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_try * factor).min(cfg.h_max);
        if h < cfg.h_min {
            traj.status = Termination::StepUnderflow;
            break;
        }
    }
    Ok((traj, hits))
}

#[allow(clippy::too_many_arguments)]
fn locate_event<S: OdeSystem + ?Sized>(
    sys: &S,
    ev: &EventSpec,
    index: usize,
    seg: &DenseSegment,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    g0: f64,
    g1: f64,
) -> Option<EventHit> {
    let n = y0.len();
    if g1 == 0.0 {
        return Some(EventHit { index, t: t1, y: y1.to_vec(), g: 0.0 });
    }
    // coarse root on the interpolant
    let mut buf = vec![0.0; n];
    let t_dense = roots::brent(
        |s| {
            seg.eval(s, &mut buf);
            (ev.g)(s, &buf)
        },
        t0,
        t1,
        1e-15 * t1.abs().max(1.0),
        0.25 * ev.root_tol,
        200,
    )?;

    // polish on direct steps from the left end
    let mut st = Stages::new(n);
    let (mut yp, mut scratch) = (vec![0.0; n], vec![0.0; n]);
    let mut restep = |s: f64, out: &mut Vec<f64>| {
        if s <= t0 {
            out.copy_from_slice(y0);
            return;
        }
        st.k[0].copy_from_slice(f0);
        st.step(sys, t0, y0, s - t0, out, &mut scratch);
    };
    let mut phi = |s: f64, yp: &mut Vec<f64>| {
        restep(s, yp);
        (ev.g)(s, yp)
    };
    let (mut a, mut ga) = (t0, g0);
    let (mut b, mut gb) = (t1, g1);
    let mut x = t_dense;
    let mut gx = phi(x, &mut yp);
    for _ in 0..60 {
        if gx.abs() <= ev.root_tol {
            break;
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
        // secant inside the bracket, bisection fallback
        let mut next = b - gb * (b - a) / (gb - ga);
        if !(next > a.min(b) && next < a.max(b)) {
            next = 0.5 * (a + b);
        }
        if next == x || (b - a).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        x = next;
        gx = phi(x, &mut yp);
    }
    Some(EventHit { index, t: x, y: yp, g: gx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        })
    }

    #[test]
    fn config_validation() {
        let ok = IntegratorConfig::default();
        assert!(ok.validate().is_ok());
        let bad = IntegratorConfig { h_min: 2.0, h_max: 1.0, ..ok };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { rtol: 0.0, ..ok };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { max_steps: 0, ..ok };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            integrate(&sys, &[1.0, f64::NAN], 0.0, 1.0, &cfg),
            Err(IntegratorError::NonFiniteInitialState)
        ));
        assert!(matches!(
            integrate(&sys, &[1.0], 0.0, 1.0, &cfg),
            Err(IntegratorError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            integrate(&sys, &[1.0, 0.0], 1.0, 1.0, &cfg),
            Err(IntegratorError::EmptyInterval { .. })
        ));
    }

    #[test]
    fn harmonic_oscillator_full_period() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let traj = integrate(&sys, &[1.0, 0.0], 0.0, 2.0 * PI, &cfg).unwrap();
        assert_eq!(traj.status, Termination::Completed);
        assert_eq!(traj.last_time(), 2.0 * PI);
        let y = traj.last_state();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn deterministic() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let a = integrate(&sys, &[1.0, 0.0], 0.0, 10.0, &cfg).unwrap();
        let b = integrate(&sys, &[1.0, 0.0], 0.0, 10.0, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let sys = oscillator();
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-10);
        let traj = integrate(&sys, &[1.0, 0.0], 0.0, 5.0, &cfg).unwrap();
        for k in 0..200 {
            let t = 5.0 * k as f64 / 199.0;
            let y = traj.interpolate(&sys, t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn falling_zero_of_position() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let ev = EventSpec::new(|_t, y| y[0], Direction::Falling);
        let (_, hits) = integrate_with_events(&sys, &[1.0, 0.0], 0.0, 2.0, &cfg, &[ev]).unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0].t - PI / 2.0).abs() < 1e-8);
        assert!(hits[0].g.abs() <= 1e-12);
    }

    #[test]
    fn direction_filtering_and_terminal() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let rising = EventSpec::new(|_t, y| y[0], Direction::Rising).terminal();
        let (traj, hits) =
            integrate_with_events(&sys, &[1.0, 0.0], 0.0, 10.0, &cfg, &[rising]).unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0].t - 1.5 * PI).abs() < 1e-8);
        assert_eq!(traj.status, Termination::Event);
        assert_eq!(traj.last_time(), hits[0].t);
    }

    #[test]
    fn event_that_never_triggers() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let ev = EventSpec::new(|_t, y| y[0] - 5.0, Direction::Any);
        let (traj, hits) = integrate_with_events(&sys, &[1.0, 0.0], 0.0, 7.0, &cfg, &[ev]).unwrap();
        assert!(hits.is_empty());
        assert_eq!(traj.status, Termination::Completed);
        assert_eq!(traj.last_time(), 7.0);
    }

    #[test]
    fn guard_skips_occurrences() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        // y0 = cos t crosses zero at pi/2 (y1 < 0) and 3pi/2 (y1 > 0)
        let ev = EventSpec::new(|_t, y| y[0], Direction::Any).guard(|_t, y| y[1] > 0.0);
        let (_, hits) = integrate_with_events(&sys, &[1.0, 0.0], 0.0, 6.0, &cfg, &[ev]).unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0].t - 1.5 * PI).abs() < 1e-8);
    }

    #[test]
    fn norm_guard_stops_blowup() {
        // y' = y^2 from 1 blows up at t = 1
        let sys = FnSystem::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&sys, &[1.0], 0.0, 2.0, &cfg).unwrap();
        assert_eq!(traj.status, Termination::NormExceeded);
        assert!(traj.last_time() < 1.0);
        assert!((traj.last_time() - 1.0).abs() < 1e-5);
        assert!(traj.check().is_err());
    }

    #[test]
    fn step_underflow_is_reported() {
        let sys = FnSystem::new(1, |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let cfg = IntegratorConfig { divergence_norm: f64::INFINITY, ..Default::default() };
        let traj = integrate(&sys, &[1.0], 0.0, 2.0, &cfg).unwrap();
        assert_eq!(traj.status, Termination::StepUnderflow);
        assert!(traj.last_time() < 1.0);
        assert!(matches!(traj.check(), Err(IntegratorError::StepSizeUnderflow { .. })));
    }

    #[test]
    fn budget_exhaustion() {
        let sys = oscillator();
        let cfg = IntegratorConfig { max_steps: 10, ..Default::default() };
        let traj = integrate(&sys, &[1.0, 0.0], 0.0, 100.0, &cfg).unwrap();
        assert_eq!(traj.status, Termination::BudgetExhausted);
        assert!(matches!(traj.check(), Err(IntegratorError::StepBudgetExhausted { .. })));
    }

    #[test]
    fn hermite_rule_integrates_observable() {
        let sys = oscillator();
        let cfg = IntegratorConfig::default();
        let traj = integrate(&sys, &[1.0, 0.0], 0.0, 1.0, &cfg).unwrap();
        // int_0^1 cos t dt = sin 1
        let v = traj.integrate_observable(|y| y[0], |_y, f| f[0]);
        // fourth-order rule on steps of the size the controller picks
        assert!((v - 1f64.sin()).abs() < 1e-8);
    }
}
