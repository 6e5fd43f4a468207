//! Monodromy matrices of the variational systems along the axisymmetric
//! periodic orbit, characteristic multipliers and parameter scans.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::conserved::{self, ConservedError};
use crate::eigen::{self, EigenError};
use crate::integrator::{IntegratorConfig, IntegratorError, OdeSystem};
use crate::model::{self, AxisymState2};

/// Imaginary parts above this mark a dominant multiplier as a complex pair.
pub const COMPLEX_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error("base amplitude {0} outside (0, 1/2)")]
    InvalidAmplitude(f64),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Conserved(#[from] ConservedError),
}

/// Linearizations along the axisymmetric orbit.
///
/// Tangent coordinates: `axisym2` uses `(A1, a1)`, `electrostatic4` uses
/// `(A1, a1, delta1, sigma1)` with `delta = D - A`, `sigma = d - a`,
/// `radial3` uses `(C1, c1, Bz1)` and `full9` the full-state layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationalSystem {
    Axisym2,
    Electrostatic4,
    Radial3,
    Full9,
}

impl VariationalSystem {
    pub const ALL: [VariationalSystem; 4] = [
        VariationalSystem::Axisym2,
        VariationalSystem::Electrostatic4,
        VariationalSystem::Radial3,
        VariationalSystem::Full9,
    ];

    pub fn dim(self) -> usize {
        match self {
            VariationalSystem::Axisym2 => 2,
            VariationalSystem::Electrostatic4 => 4,
            VariationalSystem::Radial3 => 3,
            VariationalSystem::Full9 => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VariationalSystem::Axisym2 => "axisym2",
            VariationalSystem::Electrostatic4 => "electrostatic4",
            VariationalSystem::Radial3 => "radial3",
            VariationalSystem::Full9 => "full9",
        }
    }

    /// `tr M(t) = kappa * a0(t)` along the base orbit.
    pub fn trace_coefficient(self) -> f64 {
        match self {
            VariationalSystem::Axisym2 => -4.0,
            VariationalSystem::Electrostatic4 => -6.0,
            VariationalSystem::Radial3 => -2.0,
            VariationalSystem::Full9 => -10.0,
        }
    }

    /// Coefficient matrix at a point of the base orbit, row-major.
    pub fn matrix(self, base: &AxisymState2) -> Vec<f64> {
        match self {
            VariationalSystem::Axisym2 => flatten(&model::axisym_variational_matrix(base)),
            VariationalSystem::Electrostatic4 => flatten(&model::electrostatic_variational_matrix(base)),
            VariationalSystem::Radial3 => flatten(&model::radial_variational_matrix(base)),
            VariationalSystem::Full9 => {
                let s = model::embed_electrostatic(&model::embed_axisym(base));
                flatten(&model::jacobian_full(&s))
            }
        }
    }
}

impl std::str::FromStr for VariationalSystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariationalSystem::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variational system `{s}` (expected axisym2, electrostatic4, radial3 or full9)"))
    }
}

fn flatten<const N: usize>(m: &[[f64; N]; N]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

/// Layout `[a, A, q, Psi]`: base orbit, the running integral `q = int a dt`
/// and an `n x n` fundamental matrix stored row-major.
pub struct AugmentedFlow {
    pub system: VariationalSystem,
}

impl AugmentedFlow {
    pub const PSI_OFFSET: usize = 3;
}

impl OdeSystem for AugmentedFlow {
    fn dim(&self) -> usize {
        let n = self.system.dim();
        Self::PSI_OFFSET + n * n
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let base = AxisymState2::new(y[0], y[1]);
        let d = model::rhs_axisym(&base);
        dydt[0] = d.velocity;
        dydt[1] = d.field;
        dydt[2] = y[0];
        let n = self.system.dim();
        let m = self.system.matrix(&base);
        let psi = &y[Self::PSI_OFFSET..];
        let out = &mut dydt[Self::PSI_OFFSET..];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[i * n + k] * psi[k * n + j];
                }
                out[i * n + j] = s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub system: VariationalSystem,
    pub a_star: f64,
    pub period: f64,
    /// Fundamental matrix at the period, row-major rows.
    pub psi_t: Vec<Vec<f64>>,
    pub multipliers: Vec<Complex64>,
    pub instability: f64,
    pub determinant: f64,
    pub det_residual: f64,
    /// `int_0^T tr M dt` along the computed base orbit.
    pub trace_integral: f64,
}

impl MonodromyResult {
    /// Moduli of the multipliers, largest first.
    pub fn moduli(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.multipliers.iter().map(|z| z.norm()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn dominant(&self) -> Complex64 {
        *self
            .multipliers
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.abs().total_cmp(&b.im.abs())))
            .expect("at least one multiplier")
    }

    pub fn classification(&self) -> Classification {
        if self.dominant().im.abs() > COMPLEX_THRESHOLD {
            Classification::ComplexDominant
        } else {
            Classification::RealDominant
        }
    }

    pub fn modulus_product(&self) -> f64 {
        self.multipliers.iter().map(|z| z.norm()).product()
    }

    /// `Psi(T) v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.psi_t.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// `max |lambda_i| - 1`.
pub fn instability_measure(multipliers: &[Complex64]) -> f64 {
    multipliers.iter().map(|z| z.norm()).fold(f64::NEG_INFINITY, f64::max) - 1.0
}

/// `|det Psi(T) - exp(int tr M)|`.
pub fn liouville_residual(result: &MonodromyResult) -> f64 {
    (result.determinant - result.trace_integral.exp()).abs()
}

fn check_amplitude(a_star: f64) -> Result<(), FloquetError> {
    if a_star > 0.0 && a_star <= conserved::MAX_EPSILON {
        Ok(())
    } else {
        Err(FloquetError::InvalidAmplitude(a_star))
    }
}

/// Integrates the base orbit from `(a, A) = (0, a_star)` together with the
/// fundamental matrix, stopping at the return event; the period and
/// `Psi(T)` therefore come from the same run.
pub fn fundamental_matrix(
    system: VariationalSystem,
    a_star: f64,
    cfg: &IntegratorConfig,
) -> Result<MonodromyResult, FloquetError> {
    check_amplitude(a_star)?;
    let n = system.dim();
    let flow = AugmentedFlow { system };
    let off = AugmentedFlow::PSI_OFFSET;
    let mut y0 = vec![0.0; off + n * n];
    y0[1] = a_star;
    for i in 0..n {
        y0[off + i * n + i] = 1.0;
    }
    let run = conserved::integrate_one_period(&flow, &y0, cfg)?;
    let psi_t: Vec<Vec<f64>> = run.end_state[off..].chunks_exact(n).map(|r| r.to_vec()).collect();
    let eig = eigen::eigen_small(&psi_t)?;
    let determinant = eigen::determinant(&psi_t)?;
    Ok(MonodromyResult {
        system,
        a_star,
        period: run.period,
        instability: instability_measure(&eig.eigenvalues),
        multipliers: eig.eigenvalues,
        psi_t,
        determinant,
        det_residual: (determinant - 1.0).abs(),
        trace_integral: system.trace_coefficient() * run.end_state[2],
    })
}

/// Leading-order multipliers for small amplitude `epsilon`.
pub fn asymptotic_multipliers(system: VariationalSystem, epsilon: f64) -> Option<Vec<f64>> {
    let e2 = epsilon * epsilon;
    match system {
        VariationalSystem::Electrostatic4 => {
            let c1 = 3f64.sqrt() * PI / 6.0 * e2;
            let c2 = 3f64.sqrt() * PI / 2.0 * e2;
            Some(vec![1.0 + c1, 1.0 - c1, 1.0 + c2, 1.0 - c2])
        }
        VariationalSystem::Radial3 => {
            let c = 5f64.sqrt() * PI / 3.0 * e2;
            Some(vec![1.0 + c, 1.0 - c, 1.0])
        }
        _ => None,
    }
}

/// Leading-order instability measure `max lambda - 1`.
pub fn asymptotic_instability(system: VariationalSystem, epsilon: f64) -> Option<f64> {
    asymptotic_multipliers(system, epsilon).map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    RealDominant,
    ComplexDominant,
}

impl Classification {
    pub fn tag(self) -> &'static str {
        match self {
            Classification::RealDominant => "real",
            Classification::ComplexDominant => "complex",
        }
    }
}

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Classification::RealDominant),
            "complex" => Ok(Classification::ComplexDominant),
            other => Err(format!("unknown classification `{other}`")),
        }
    }
}

/// One grid point of a scan. Failed points keep their error message and
/// carry NaN in the numeric fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub a_star: f64,
    pub period: f64,
    pub lambda_abs: Vec<f64>,
    pub instability: f64,
    pub class: Result<Classification, String>,
}

impl ScanRow {
    pub fn from_result(r: &MonodromyResult) -> Self {
        ScanRow {
            a_star: r.a_star,
            period: r.period,
            lambda_abs: r.moduli(),
            instability: r.instability,
            class: Ok(r.classification()),
        }
    }

    pub fn failed(system: VariationalSystem, a_star: f64, err: &FloquetError) -> Self {
        ScanRow {
            a_star,
            period: f64::NAN,
            lambda_abs: vec![f64::NAN; system.dim()],
            instability: f64::NAN,
            class: Err(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.class.is_ok()
    }
}

/// Monodromy analysis at every grid point. Rows are computed in parallel on
/// the current rayon pool and returned in grid order.
pub fn scan(system: VariationalSystem, grid: &[f64], cfg: &IntegratorConfig) -> Vec<ScanRow> {
    grid.par_iter()
        .map(|&a| match fundamental_matrix(system, a, cfg) {
            Ok(r) => ScanRow::from_result(&r),
            Err(e) => ScanRow::failed(system, a, &e),
        })
        .collect()
}

/// Points where the dominant-multiplier classification changes between
/// neighbouring successful rows, reported at the midpoint.
pub fn classification_transitions(rows: &[ScanRow]) -> Vec<(f64, Classification, Classification)> {
    let ok: Vec<(f64, Classification)> =
        rows.iter().filter_map(|r| r.class.as_ref().ok().map(|c| (r.a_star, *c))).collect();
    ok.windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| (0.5 * (w[0].0 + w[1].0), w[0].1, w[1].1))
        .collect()
}
