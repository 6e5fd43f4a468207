use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use coldplasma::blowup::{self, Verdict};
use coldplasma::conserved;
use coldplasma::floquet;
use coldplasma::integrator;
use coldplasma::io;
use coldplasma::model;

use crate::config::{Blowup, CliError, Horizon, Period, Scan, Simulate, Spectrum};

fn run_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{context}: {e}"))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| run_err(&format!("writing {}", p.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| run_err("thread pool", e))?;
            Ok(pool.install(f))
        }
    }
}

pub fn simulate(s: Simulate) -> Result<(), CliError> {
    let t_max = match s.horizon {
        Horizon::Time(t) => t,
        Horizon::Periods(p) => {
            let k = conserved::first_integral_K(s.init[0], s.init[1]).map_err(|e| run_err("init", e))?;
            let (_, a_plus) = conserved::amplitude_roots(k).map_err(|e| run_err("init", e))?;
            let period = conserved::period_quadrature(a_plus).map_err(|e| run_err("period", e))?;
            p as f64 * period
        }
    };
    let traj = integrator::integrate(&s.system, &s.init, 0.0, t_max, &s.cfg).map_err(|e| run_err("simulate", e))?;
    emit(s.out.as_deref(), &io::trajectory_csv(s.system, &traj))?;
    traj.check().map_err(|e| run_err("simulate (partial output written)", e))?;
    Ok(())
}

pub fn period(p: Period) -> Result<(), CliError> {
    let cfg = p.cfg;
    let rows = with_jobs(p.jobs, || {
        p.amplitudes.par_iter().map(|&e| conserved::period(e, &cfg).map_err(|err| run_err(&format!("eps={e}"), err))).collect::<Vec<_>>()
    })?;
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    emit(p.out.as_deref(), &io::period_csv(&rows))
}

pub fn floquet_scan(s: Scan) -> Result<(), CliError> {
    let rows = with_jobs(s.jobs, || floquet::scan(s.system, &s.grid, &s.cfg))?;
    emit(s.out.as_deref(), &io::scan_csv(&rows, s.system.dim()))?;
    if let Some(script) = &s.plot_script {
        let data = s.out.as_deref().map_or("scan.csv".to_string(), |p| p.display().to_string());
        let title = format!("{} multipliers", s.system.name());
        emit(Some(script), &io::plot_script(&data, s.system.dim(), &title))?;
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} grid points failed; see the class column", rows.len());
    }
    Ok(())
}

pub fn blowup(b: Blowup) -> Result<(), CliError> {
    let (report, traj) =
        blowup::simulate_until_blowup(b.system, &b.init, b.t_max, &b.cfg).map_err(|e| run_err("blowup", e))?;
    if let Some(path) = &b.series {
        emit(Some(path), &io::time_series_csv(b.system, &traj))?;
    }
    let mut json = io::to_json(&report).map_err(|e| run_err("report", e))?;
    json.push('\n');
    emit(b.out.as_deref(), &json)?;
    if report.verdict == Verdict::Inconclusive {
        return Err(CliError::Run(format!("blowup: step budget exhausted at t = {} (report written)", report.t_last)));
    }
    Ok(())
}

pub fn spectrum(s: Spectrum) -> Result<(), CliError> {
    let mut out = String::from("bz0,re,im\n");
    for &b in &s.bz0 {
        for z in model::equilibrium_spectrum(b).eigenvalues {
            let _ = writeln!(out, "{},{},{}", io::fmt_f64(b), io::fmt_f64(z.re), io::fmt_f64(z.im));
        }
    }
    emit(s.out.as_deref(), &out)
}

/// Schema notes shown by `--help`.
pub const SIMULATE_SCHEMA: &str = "Output columns: t, the state components, density and, for axisym2, the first integral K.";
pub const PERIOD_SCHEMA: &str = "Output columns: epsilon, T_quadrature, T_event, T_asymptotic, A_minus, A_plus, K.";
pub const SCAN_SCHEMA: &str = "Output columns: A_star, T, lambda_abs_1..n (descending), S, class (real, complex or `error: ...`).";
pub const BLOWUP_SCHEMA: &str = "Output: JSON report (verdict, t_c_estimate, t_last, reason, extrema). The --series CSV has t, the state components and norm.";
pub const SPECTRUM_SCHEMA: &str = "Output columns: bz0, re, im; five eigenvalues per field value.";
