//! CSV and JSON emission and the matching readers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so that output
//! is byte-stable and every value round-trips exactly.

use serde::{de::DeserializeOwned, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use crate::conserved::{self, PeriodResult};
use crate::floquet::{Classification, ScanRow};
use crate::integrator::Trajectory;
use crate::model::PlasmaSystem;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty table")]
    Empty,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

/// Header and rows of a comma-separated table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let c = self.column(name).ok_or(IoError::Parse { line: 1, msg: format!("missing column `{name}`") })?;
        self.rows.iter().enumerate().map(|(i, r)| parse_f64(&r[c], i + 2)).collect()
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, IoError> {
    s.trim().parse::<f64>().map_err(|e| IoError::Parse { line, msg: format!("`{s}`: {e}") })
}

pub fn read_csv(text: &str) -> Result<Table, IoError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or(IoError::Empty)?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let r: Vec<String> = l.split(',').map(str::to_string).collect();
        if r.len() != header.len() {
            return Err(IoError::Parse {
                line: i + 2,
                msg: format!("expected {} fields, found {}", header.len(), r.len()),
            });
        }
        rows.push(r);
    }
    Ok(Table { header, rows })
}

/// `t, components..., density` and, for the axisymmetric system, `K`.
pub fn trajectory_csv(system: PlasmaSystem, traj: &Trajectory) -> String {
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    header.extend(system.component_names().iter().map(|s| s.to_string()));
    header.push("density".into());
    let with_k = system == PlasmaSystem::Axisym2;
    if with_k {
        header.push("K".into());
    }
    push_row(&mut out, header);
    for (t, y) in traj.times.iter().zip(traj.states()) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(y.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(system.density(y)));
        if with_k {
            row.push(fmt_f64(conserved::first_integral_K(y[0], y[1]).unwrap_or(f64::NAN)));
        }
        push_row(&mut out, row);
    }
    out
}

/// `t, components..., norm` time series of a blow-up run.
pub fn time_series_csv(system: PlasmaSystem, traj: &Trajectory) -> String {
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    header.extend(system.component_names().iter().map(|s| s.to_string()));
    header.push("norm".into());
    push_row(&mut out, header);
    for (t, y) in traj.times.iter().zip(traj.states()) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(y.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(y.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
        push_row(&mut out, row);
    }
    out
}

pub const PERIOD_HEADER: [&str; 7] = ["epsilon", "T_quadrature", "T_event", "T_asymptotic", "A_minus", "A_plus", "K"];

pub fn period_csv(rows: &[PeriodResult]) -> String {
    let mut out = String::new();
    push_row(&mut out, PERIOD_HEADER.iter().map(|s| s.to_string()));
    for r in rows {
        push_row(
            &mut out,
            [r.epsilon, r.t_quadrature, r.t_event, r.t_asymptotic, r.a_minus, r.a_plus, r.k].map(fmt_f64),
        );
    }
    out
}

pub fn read_period_csv(text: &str) -> Result<Vec<PeriodResult>, IoError> {
    let t = read_csv(text)?;
    let cols: Vec<Vec<f64>> = PERIOD_HEADER.iter().map(|h| t.floats(h)).collect::<Result<_, _>>()?;
    Ok((0..t.rows.len())
        .map(|i| PeriodResult {
            epsilon: cols[0][i],
            t_quadrature: cols[1][i],
            t_event: cols[2][i],
            t_asymptotic: cols[3][i],
            a_minus: cols[4][i],
            a_plus: cols[5][i],
            k: cols[6][i],
        })
        .collect())
}

/// Header `A_star,T,lambda_abs_1..n,S,class`. Failed rows carry NaN and a
/// class of the form `error: message` (commas replaced by semicolons).
pub fn scan_csv(rows: &[ScanRow], n: usize) -> String {
    let mut out = String::new();
    let mut header = vec!["A_star".to_string(), "T".to_string()];
    header.extend((1..=n).map(|i| format!("lambda_abs_{i}")));
    header.push("S".into());
    header.push("class".into());
    push_row(&mut out, header);
    for r in rows {
        let mut row = vec![fmt_f64(r.a_star), fmt_f64(r.period)];
        row.extend(r.lambda_abs.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(r.instability));
        row.push(match &r.class {
            Ok(c) => c.tag().to_string(),
            Err(e) => format!("error: {}", e.replace([',', '\n'], ";")),
        });
        push_row(&mut out, row);
    }
    out
}

pub fn read_scan_csv(text: &str) -> Result<Vec<ScanRow>, IoError> {
    let t = read_csv(text)?;
    let n = t.header.iter().filter(|h| h.starts_with("lambda_abs_")).count();
    if t.header.len() != n + 4 || t.header[0] != "A_star" || t.header[1] != "T" {
        return Err(IoError::Parse { line: 1, msg: "not a scan table".into() });
    }
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            let lambda_abs = r[2..2 + n].iter().map(|s| parse_f64(s, line)).collect::<Result<_, _>>()?;
            let tag = &r[n + 3];
            let class = match tag.strip_prefix("error: ") {
                Some(msg) => Err(msg.to_string()),
                None => Ok(tag.parse::<Classification>().map_err(|msg| IoError::Parse { line, msg })?),
            };
            Ok(ScanRow {
                a_star: parse_f64(&r[0], line)?,
                period: parse_f64(&r[1], line)?,
                lambda_abs,
                instability: parse_f64(&r[n + 2], line)?,
                class,
            })
        })
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    Ok(serde_json::from_str(text)?)
}

/// Parses `start:stop:step` into the inclusive grid `start + k step <= stop`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("grid `{spec}` must have the form start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("grid `{spec}`: `{s}`: {e}"));
    let (start, stop, step) = (num(a)?, num(b)?, num(h)?);
    linear_grid(start, stop, step).map_err(|e| format!("grid `{spec}`: {e}"))
}

pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err("step must be positive and bounds finite".into());
    }
    if stop < start {
        return Err("empty grid (stop < start)".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Gnuplot script drawing `|lambda_i|` against `A_star` from a scan table.
pub fn plot_script(csv_path: &str, n: usize, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel 'A*'");
    let _ = writeln!(s, "set ylabel '|lambda|'");
    let _ = writeln!(s, "set logscale y");
    let plots: Vec<String> =
        (1..=n).map(|i| format!("'{csv_path}' using 1:{} with lines", i + 2)).collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
