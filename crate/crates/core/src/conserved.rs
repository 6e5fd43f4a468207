//! First integral and oscillation period of the axisymmetric system
//! `a' = -A - a^2`, `A' = (1 - 2A) a`.
//!
//! Along orbits `K = (a^2 + 1/2) / (2A - 1) - ln|2A - 1| / 2` is constant.
//! Orbits with `a(0) = 0`, `0 < A(0) < 1/2` are closed and oscillate between
//! the two zeros `A_minus < 0 < A_plus` of
//! `F(A) = (ln|1 - 2A| / 2 + K)(2A - 1) - 1/2`, with `a^2 = F(A)` on the orbit.
//!
//! Most of the root and period arithmetic is done in the log-density variable
//! `w = ln(1 - 2A)`, where `F = -e^w (w/2 + K) - 1/2`. The lower amplitude
//! `A_minus` is enormous and negative for amplitudes close to 1/2, so working
//! in `w` keeps all quantities moderate.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::integrator::{self, Direction, EventSpec, IntegratorConfig, IntegratorError, OdeSystem};
use crate::model::PlasmaSystem;
use crate::{quadrature, roots};

/// Amplitudes above this value are refused.
pub const MAX_EPSILON: f64 = 0.499;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConservedError {
    #[error("first integral is singular at A = 1/2 (A = {0})")]
    SingularDensity(f64),
    #[error("level K = {0} has no bounded phase curve")]
    NoBoundedOrbit(f64),
    #[error("amplitude {0} outside (0, {MAX_EPSILON}]")]
    InvalidAmplitude(f64),
    #[error("no return event before t = {0}")]
    EventNotFound(f64),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

#[allow(non_snake_case)]
pub fn first_integral_K(a: f64, A: f64) -> Result<f64, ConservedError> {
    let m = 2.0 * A - 1.0;
    if m.abs() <= 1e-14 || !m.is_finite() {
        return Err(ConservedError::SingularDensity(A));
    }
    Ok((a * a + 0.5) / m - 0.5 * m.abs().ln())
}

/// `F(A) = a^2` on the level set `K`.
pub fn squared_velocity(k: f64, field: f64) -> f64 {
    let m = 2.0 * field - 1.0;
    (0.5 * m.abs().ln() + k) * m - 0.5
}

fn f_of_w(k: f64, w: f64) -> f64 {
    -w.exp() * (0.5 * w + k) - 0.5
}

fn field_of_w(w: f64) -> f64 {
    -0.5 * w.exp_m1()
}

pub fn check_epsilon(epsilon: f64) -> Result<(), ConservedError> {
    if epsilon > 0.0 && epsilon <= MAX_EPSILON {
        Ok(())
    } else {
        Err(ConservedError::InvalidAmplitude(epsilon))
    }
}

/// Log-density roots `(w_minus, w_plus)`, `w_minus > 0 > w_plus`, for `K < -1/2`.
fn log_roots(k: f64) -> Result<(f64, f64), ConservedError> {
    // F(0) = -K - 1/2 > 0 exactly when the level carries a closed orbit
    if !(k < -0.5) || !k.is_finite() {
        return Err(ConservedError::NoBoundedOrbit(k));
    }
    let f = |w: f64| f_of_w(k, w);
    // F vanishes only through its second factor at w = -2K, where F = -1/2
    let w_minus = roots::bisect(f, 0.0, -2.0 * k, 0.0).ok_or(ConservedError::NoBoundedOrbit(k))?;
    let mut lo = -1.0;
    while f(lo) >= 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Err(ConservedError::NoBoundedOrbit(k));
        }
    }
    let w_plus = roots::bisect(f, lo, 0.0, 0.0).ok_or(ConservedError::NoBoundedOrbit(k))?;
    Ok((w_minus, w_plus))
}

/// The two zeros `A_minus < 0 < A_plus` of `F` on the level `K`.
pub fn amplitude_roots(k: f64) -> Result<(f64, f64), ConservedError> {
    let (wm, wp) = log_roots(k)?;
    Ok((field_of_w(wm), field_of_w(wp)))
}

/// `F` on the level through the root `w_r`, written relative to that root:
/// `F(w_r + tau) = (expm1(tau) - tau e^(w_r + tau)) / 2`.
///
/// This is exact given `F(w_r) = 0` and has no cancellation near the root.
fn f_near_root(w_root: f64, tau: f64) -> f64 {
    0.5 * (tau.exp_m1() - tau * (w_root + tau).exp())
}

/// Period by quadrature of `T = int dw / sqrt(F(w))` between the two roots,
/// with `w = w_plus + s^2` and `w = w_minus - s^2` on the two halves.
pub fn period_quadrature(epsilon: f64) -> Result<f64, ConservedError> {
    check_epsilon(epsilon)?;
    let k = first_integral_K(0.0, epsilon)?;
    let (w_minus, _) = log_roots(k)?;
    // the starting point is a turning point, so its root is known exactly
    let w_plus = (-2.0 * epsilon).ln_1p();
    let split = 0.0;
    let integrand = |w_root: f64, sign: f64| {
        move |s: f64| {
            let f = f_near_root(w_root, sign * s * s);
            if s == 0.0 || f <= 0.0 {
                // limit 2 / sqrt(|F'(w_r)|)
                let slope = 0.5 * (1.0 - w_root.exp()).abs();
                return 2.0 / slope.sqrt();
            }
            2.0 * s / f.sqrt()
        }
    };
    let right = quadrature::integrate(integrand(w_plus, 1.0), 0.0, (split - w_plus).sqrt(), 0.0, 1e-13, 2000);
    let left = quadrature::integrate(integrand(w_minus, -1.0), 0.0, (w_minus - split).sqrt(), 0.0, 1e-13, 2000);
    Ok(right.value + left.value)
}

/// Axisymmetric system started at the turning point `(a, A) = (0, epsilon)`.
/// One period elapses at the first downward zero of `a` with `A > 0`.
pub fn period_event_spec() -> EventSpec {
    EventSpec::new(|_t, y| y[0], Direction::Falling).terminal().guard(|_t, y| y[1] > 0.0)
}

/// A system whose first two components are the axisymmetric `(a, A)`,
/// advanced in the rescaled time `tau` with
/// `dt/dtau = (1 + a^2 + A^2)^(-1/4)`. Physical time is appended as the last
/// component.
///
/// Near the lower turning point of large-amplitude orbits `|A|` reaches
/// `1e40` and beyond, `a` scales like `sqrt|A|`, and the orbit passes in a
/// time far below the resolution of `t`. In `tau` the natural rates of the
/// orbit stay of order one.
struct Rescaled<'a, S: ?Sized> {
    inner: &'a S,
}

impl<S: OdeSystem + ?Sized> OdeSystem for Rescaled<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn rhs(&self, _tau: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.inner.dim();
        let g = y[0].hypot(1.0).hypot(y[1]).sqrt().recip();
        self.inner.rhs_scaled(y[n], &y[..n], g, &mut dydt[..n]);
        dydt[n] = g;
    }
}

/// State at the end of one period of the orbit through `(0, epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRun {
    pub period: f64,
    pub end_state: Vec<f64>,
    pub steps: usize,
}

/// Integrates `sys` (first two components `(a, A)`, starting at
/// `(0, epsilon)`) over exactly one period of the base orbit. The period is
/// the time of the return event, so the end state and the period come from
/// the same run.
pub fn integrate_one_period<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<PeriodRun, ConservedError> {
    let epsilon = y0[1];
    check_epsilon(epsilon)?;
    let k = first_integral_K(0.0, epsilon)?;
    let (w_minus, w_plus) = log_roots(k)?;
    // generous: the rescaled speed of ln(1 - 2A) is bounded by a constant
    let tau_max = 4.0 * PI + 20.0 * (w_minus - w_plus);
    let mut start = y0.to_vec();
    start.push(0.0);
    let (traj, hits) = integrator::integrate_with_events(
        &Rescaled { inner: sys },
        &start,
        0.0,
        tau_max,
        &cfg.without_divergence_guard(),
        &[period_event_spec()],
    )?;
    traj.check()?;
    let hit = hits.first().ok_or(ConservedError::EventNotFound(tau_max))?;
    let n = sys.dim();
    Ok(PeriodRun { period: hit.y[n], end_state: hit.y[..n].to_vec(), steps: traj.stats.accepted })
}

/// Period as the return time of the axisymmetric flow to its starting
/// turning point.
pub fn period_event(epsilon: f64, cfg: &IntegratorConfig) -> Result<f64, ConservedError> {
    check_epsilon(epsilon)?;
    Ok(integrate_one_period(&PlasmaSystem::Axisym2, &[0.0, epsilon], cfg)?.period)
}

/// `int_0^T a dt` over one period, carried as an extra ODE component.
pub fn velocity_integral(epsilon: f64, cfg: &IntegratorConfig) -> Result<f64, ConservedError> {
    check_epsilon(epsilon)?;
    Ok(integrate_one_period(&WithVelocityIntegral, &[0.0, epsilon, 0.0], cfg)?.end_state[2])
}

/// Axisymmetric flow with `q' = a` appended.
struct WithVelocityIntegral;

impl OdeSystem for WithVelocityIntegral {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.rhs_scaled(t, y, 1.0, dydt);
    }

    fn rhs_scaled(&self, t: f64, y: &[f64], scale: f64, dydt: &mut [f64]) {
        PlasmaSystem::Axisym2.rhs_scaled(t, &y[..2], scale, &mut dydt[..2]);
        dydt[2] = scale * y[0];
    }
}

/// `2 pi (1 - epsilon^2 / 12)`.
pub fn period_asymptotic(epsilon: f64) -> f64 {
    2.0 * PI * (1.0 - epsilon * epsilon / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub epsilon: f64,
    pub t_quadrature: f64,
    pub t_event: f64,
    pub t_asymptotic: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub k: f64,
}

impl PeriodResult {
    pub fn relative_disagreement(&self) -> f64 {
        (self.t_quadrature - self.t_event).abs() / self.t_event
    }
}

pub fn period(epsilon: f64, cfg: &IntegratorConfig) -> Result<PeriodResult, ConservedError> {
    check_epsilon(epsilon)?;
    let k = first_integral_K(0.0, epsilon)?;
    let (a_minus, _) = amplitude_roots(k)?;
    Ok(PeriodResult {
        epsilon,
        t_quadrature: period_quadrature(epsilon)?,
        t_event: period_event(epsilon, cfg)?,
        t_asymptotic: period_asymptotic(epsilon),
        a_minus,
        a_plus: epsilon,
        k,
    })
}

/// Largest `|K(t) - K(0)|` over the states of an axisymmetric trajectory.
pub fn max_k_drift<'a>(states: impl IntoIterator<Item = &'a [f64]>) -> Result<f64, ConservedError> {
    let mut it = states.into_iter();
    let Some(first) = it.next() else { return Ok(0.0) };
    let k0 = first_integral_K(first[0], first[1])?;
    let mut worst: f64 = 0.0;
    for y in it {
        worst = worst.max((first_integral_K(y[0], y[1])? - k0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_examples() {
        assert_eq!(first_integral_K(0.0, 0.0).unwrap(), -0.5);
        let k = first_integral_K(0.0, 0.1).unwrap();
        assert!((k - (0.5 / -0.8 - 0.5 * 0.8f64.ln())).abs() < 1e-15);
        assert!((k + 0.513_428).abs() < 1e-6);
        assert!(matches!(first_integral_K(0.3, 0.5), Err(ConservedError::SingularDensity(_))));
    }

    #[test]
    fn squared_velocity_vanishes_at_turning_point() {
        for eps in [0.01, 0.1, 0.3, 0.45] {
            let k = first_integral_K(0.0, eps).unwrap();
            assert!(squared_velocity(k, eps).abs() < 1e-15);
            assert!(squared_velocity(k, 0.0) > 0.0);
        }
    }

    #[test]
    fn roots_from_turning_point() {
        for eps in [1e-3, 0.05, 0.2, 0.3, 0.45, 0.49] {
            let k = first_integral_K(0.0, eps).unwrap();
            let (am, ap) = amplitude_roots(k).unwrap();
            assert!((ap - eps).abs() < 1e-12, "eps={eps} ap={ap}");
            assert!(am < 0.0);
            let w = (1.0 - 2.0 * am).ln();
            assert!(f_of_w(k, w).abs() < 1e-9 * w.exp(), "eps={eps}");
        }
    }

    #[test]
    fn small_amplitude_roots_are_symmetric() {
        let ratio = |eps: f64| {
            let (am, ap) = amplitude_roots(first_integral_K(0.0, eps).unwrap()).unwrap();
            am / ap
        };
        let (r1, r2) = (ratio(1e-2), ratio(1e-3));
        assert!((r2 + 1.0).abs() < (r1 + 1.0).abs());
        assert!((r2 + 1.0).abs() < 1e-2);
    }

    #[test]
    fn lower_root_matches_grid_scan() {
        let k = first_integral_K(0.0, 0.3).unwrap();
        let (am, _) = amplitude_roots(k).unwrap();
        // sign scan of F(A) on a fine grid over [-10, 0]
        let n = 1_000_000;
        let mut bracket = None;
        let mut prev = squared_velocity(k, -10.0);
        for i in 1..=n {
            let x = -10.0 + 10.0 * i as f64 / n as f64;
            let v = squared_velocity(k, x);
            if prev < 0.0 && v >= 0.0 {
                bracket = Some((x - 1e-5, x));
                break;
            }
            prev = v;
        }
        let (lo, hi) = bracket.expect("sign change on the grid");
        let scan = roots::bisect(|x| squared_velocity(k, x), lo, hi, 0.0).unwrap();
        assert!((scan - am).abs() < 1e-10, "{scan} vs {am}");
    }

    #[test]
    fn unbounded_levels_are_rejected() {
        assert!(matches!(amplitude_roots(-0.5), Err(ConservedError::NoBoundedOrbit(_))));
        assert!(matches!(amplitude_roots(0.3), Err(ConservedError::NoBoundedOrbit(_))));
        assert!(amplitude_roots(f64::NAN).is_err());
    }

    #[test]
    fn root_relative_form_matches_direct_form() {
        let eps = 0.3;
        let k = first_integral_K(0.0, eps).unwrap();
        let (wm, _) = log_roots(k).unwrap();
        let wp = (1.0 - 2.0 * eps).ln();
        for tau in [0.05, 0.3, 0.7] {
            assert!((f_near_root(wp, tau) - f_of_w(k, wp + tau)).abs() < 1e-12);
            assert!((f_near_root(wm, -tau) - f_of_w(k, wm - tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_period_small_amplitude() {
        // reference from an independent high-order event integration
        let t = period_quadrature(0.1).unwrap();
        assert!((t - 6.276_156_32).abs() < 1e-7, "{t}");
        assert!((t - period_asymptotic(0.1)).abs() < 2e-3);
        let t = period_quadrature(1e-3).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn invalid_amplitudes() {
        for eps in [0.0, -0.1, 0.4995, 0.6, f64::NAN] {
            assert!(matches!(period_quadrature(eps), Err(ConservedError::InvalidAmplitude(_))));
        }
    }

    #[test]
    fn methods_agree() {
        let cfg = IntegratorConfig::default();
        for eps in [0.1, 0.45, 0.499] {
            let r = period(eps, &cfg).unwrap();
            assert!(r.relative_disagreement() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn velocity_has_zero_mean() {
        let cfg = IntegratorConfig::default();
        for eps in [0.05, 0.3, 0.45] {
            assert!(velocity_integral(eps, &cfg).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn asymptotic_values() {
        assert_eq!(period_asymptotic(0.0), 2.0 * PI);
        assert!((period_asymptotic(0.1) - 6.277_949).abs() < 1e-6);
    }
}
