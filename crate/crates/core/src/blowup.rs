//! Finite-time blow-up experiments on the nonlinear systems and growth of
//! small perturbations of the axisymmetric orbit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conserved::{self, ConservedError};
use crate::floquet::VariationalSystem;
use crate::integrator::{self, IntegratorConfig, IntegratorError, OdeSystem, Termination, Trajectory};
use crate::model::PlasmaSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlowupError {
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("t_max must be positive (got {0})")]
    InvalidHorizon(f64),
    #[error("perturbation must be nonzero with {expected} components")]
    InvalidPerturbation { expected: usize },
    #[error("deviation saturated at t = {saturation_time} after {samples} samples")]
    FitFailure { saturation_time: f64, samples: usize },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Conserved(#[from] ConservedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BlewUp,
    BoundedThrough,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    NormThreshold,
    StepUnderflow,
    Completed,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub system: PlasmaSystem,
    pub initial_state: Vec<f64>,
    pub t_max: f64,
    pub verdict: Verdict,
    /// Last valid time before divergence, refined at tighter tolerance.
    pub t_c_estimate: Option<f64>,
    /// Unrefined last valid time of the main run.
    pub t_last: f64,
    pub reason: StopReason,
    pub max_norm_observed: f64,
    /// Largest diagonal field entry seen; 1/2 is the density boundary of
    /// symmetric states.
    pub max_a_observed: f64,
    /// First recorded time with nonpositive density.
    pub density_boundary_time: Option<f64>,
}

fn validate_state(system: PlasmaSystem, y0: &[f64]) -> Result<(), BlowupError> {
    if y0.len() != system.dim() {
        return Err(BlowupError::InvalidInitialState(format!(
            "{} expects {} components, got {}",
            system.name(),
            system.dim(),
            y0.len()
        )));
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(BlowupError::InvalidInitialState("non-finite component".into()));
    }
    if !(system.density(y0) > 0.0) {
        return Err(BlowupError::InvalidInitialState("density must be positive".into()));
    }
    Ok(())
}

fn norm_inf(y: &[f64]) -> f64 {
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Integrates until the norm guard fires, the step size underflows or
/// `t_max` is reached.
///
/// After a blow-up the last stretch of the run (from the last stored point
/// at least one time unit before the stop) is repeated at 100x tighter
/// tolerances, and the stop time of that repeat is the reported estimate.
pub fn simulate_until_blowup(
    system: PlasmaSystem,
    y0: &[f64],
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<(BlowupReport, Trajectory), BlowupError> {
    validate_state(system, y0)?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(BlowupError::InvalidHorizon(t_max));
    }
    let traj = integrator::integrate(&system, y0, 0.0, t_max, cfg)?;
    let t_last = traj.last_time();
    let (verdict, reason) = match traj.status {
        Termination::Completed | Termination::Event => (Verdict::BoundedThrough, StopReason::Completed),
        Termination::NormExceeded => (Verdict::BlewUp, StopReason::NormThreshold),
        Termination::StepUnderflow => (Verdict::BlewUp, StopReason::StepUnderflow),
        Termination::BudgetExhausted => (Verdict::Inconclusive, StopReason::BudgetExhausted),
    };
    let mut max_norm: f64 = 0.0;
    let mut max_a = f64::NEG_INFINITY;
    let mut boundary = None;
    for (t, y) in traj.times.iter().zip(traj.states()) {
        max_norm = max_norm.max(norm_inf(y));
        max_a = max_a.max(system.max_field_diagonal(y));
        if boundary.is_none() && system.density(y) <= 0.0 {
            boundary = Some(*t);
        }
    }
    let t_c_estimate = if verdict == Verdict::BlewUp { Some(refine_blowup_time(system, &traj, cfg)?) } else { None };
    let report = BlowupReport {
        system,
        initial_state: y0.to_vec(),
        t_max,
        verdict,
        t_c_estimate,
        t_last,
        reason,
        max_norm_observed: max_norm,
        max_a_observed: max_a,
        density_boundary_time: boundary,
    };
    Ok((report, traj))
}

fn refine_blowup_time(system: PlasmaSystem, traj: &Trajectory, cfg: &IntegratorConfig) -> Result<f64, BlowupError> {
    let t_last = traj.last_time();
    let start = traj.times.partition_point(|&t| t <= t_last - 1.0).saturating_sub(1);
    let t0 = traj.times[start];
    let tight = IntegratorConfig { h_init: traj.stats.last_step.max(cfg.h_min), ..cfg.tightened(100.0) };
    let rerun = integrator::integrate(&system, traj.state(start), t0, t_last + 10.0, &tight)?;
    match rerun.status {
        Termination::NormExceeded | Termination::StepUnderflow => Ok(rerun.last_time()),
        _ => Ok(t_last),
    }
}

/// Verdict for each magnetic value, starting from `(a, c, A, C)` of the
/// radial system. Runs are independent and evaluated in parallel; the table
/// keeps the grid order.
pub fn magnetic_threshold_probe(
    base: [f64; 4],
    bz_grid: &[f64],
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Vec<(f64, Result<BlowupReport, BlowupError>)> {
    bz_grid
        .par_iter()
        .map(|&bz| {
            let y0 = [base[0], base[1], base[2], base[3], bz];
            (bz, simulate_until_blowup(PlasmaSystem::Radial5, &y0, t_max, cfg).map(|(r, _)| r))
        })
        .collect()
}

/// Nonlinear system and state corresponding to a tangent of a variational
/// system at the base point `(a, A)`.
pub fn nonlinear_embedding(system: VariationalSystem, base: [f64; 2], tangent: &[f64]) -> (PlasmaSystem, Vec<f64>) {
    let [a, e] = base;
    match system {
        VariationalSystem::Axisym2 => (PlasmaSystem::Axisym2, vec![a + tangent[1], e + tangent[0]]),
        VariationalSystem::Electrostatic4 => {
            let (a1, e1, delta, sigma) = (tangent[1], tangent[0], tangent[2], tangent[3]);
            (PlasmaSystem::Electrostatic4, vec![a + a1, a + a1 + sigma, e + e1, e + e1 + delta])
        }
        VariationalSystem::Radial3 => (PlasmaSystem::Radial5, vec![a, tangent[1], e, tangent[0], tangent[2]]),
        VariationalSystem::Full9 => {
            let mut y = vec![a, 0.0, 0.0, a, e, 0.0, 0.0, e, 0.0];
            y.iter_mut().zip(tangent).for_each(|(v, t)| *v += t);
            (PlasmaSystem::Full9, y)
        }
    }
}

/// Two copies of a system integrated with a shared step sequence.
struct Pair(PlasmaSystem);

impl OdeSystem for Pair {
    fn dim(&self) -> usize {
        2 * self.0.dim()
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.0.dim();
        let (y1, y2) = y.split_at(n);
        let (d1, d2) = dydt.split_at_mut(n);
        self.0.rhs(t, y1, d1);
        self.0.rhs(t, y2, d2);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub period: f64,
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
}

/// Deviation at which the perturbation is no longer treated as small.
pub const SATURATION_LEVEL: f64 = 1e-2;

/// Fits `ln |y_pert(t) - y_base(t)|` against `t` at whole periods of the
/// base orbit, starting from a perturbation of infinity-norm `scale` along
/// `direction`.
pub fn growth_rate(
    system: VariationalSystem,
    a_star: f64,
    direction: &[f64],
    scale: f64,
    n_periods: usize,
    cfg: &IntegratorConfig,
) -> Result<GrowthFit, BlowupError> {
    let dir_norm = norm_inf(direction);
    if direction.len() != system.dim() || !(dir_norm > 0.0) || !dir_norm.is_finite() {
        return Err(BlowupError::InvalidPerturbation { expected: system.dim() });
    }
    let period = conserved::period_event(a_star, cfg)?;
    let tangent: Vec<f64> = direction.iter().map(|v| v * scale / dir_norm).collect();
    let (nl, perturbed) = nonlinear_embedding(system, [0.0, a_star], &tangent);
    let (_, base) = nonlinear_embedding(system, [0.0, a_star], &vec![0.0; system.dim()]);
    let n = nl.dim();
    let mut y: Vec<f64> = base.iter().chain(&perturbed).copied().collect();
    let pair = Pair(nl);
    let cfg = cfg.without_divergence_guard();
    let deviation = |y: &[f64]| norm_inf(&y[..n].iter().zip(&y[n..]).map(|(a, b)| b - a).collect::<Vec<_>>());

    let mut times = vec![0.0];
    let mut deviations = vec![deviation(&y)];
    for k in 1..=n_periods {
        let (t0, t1) = ((k - 1) as f64 * period, k as f64 * period);
        let seg = integrator::integrate(&pair, &y, t0, t1, &cfg)?;
        seg.check()?;
        y = seg.last_state().to_vec();
        let dev = deviation(&y);
        if dev > SATURATION_LEVEL || !dev.is_finite() {
            if times.len() < 5 {
                return Err(BlowupError::FitFailure { saturation_time: t1, samples: times.len() });
            }
            break;
        }
        times.push(t1);
        deviations.push(dev);
    }
    if times.len() < 5 {
        return Err(BlowupError::FitFailure { saturation_time: f64::NAN, samples: times.len() });
    }
    let logs: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    Ok(GrowthFit { exponent: slope(&times, &logs), period, times, deviations })
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
