//! Per-subcommand options. Every option can come from a flag or from the
//! matching section of a TOML config file; flags win.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use coldplasma::conserved::MAX_EPSILON;
use coldplasma::floquet::VariationalSystem;
use coldplasma::integrator::IntegratorConfig;
use coldplasma::io;
use coldplasma::model::PlasmaSystem;

/// A failure to run. Usage errors name the offending field.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

pub fn usage(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Usage(format!("`{field}`: {msg}"))
}

fn required<T>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(field, "missing (pass the flag or set it in the config file)"))
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Tolerances {
    /// Relative tolerance [default: 1e-10]
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance [default: 1e-10]
    #[arg(long)]
    pub atol: Option<f64>,
}

impl Tolerances {
    fn or(self, file: Self) -> Self {
        Self { rtol: self.rtol.or(file.rtol), atol: self.atol.or(file.atol) }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let d = IntegratorConfig::default();
        let rtol = positive(self.rtol.unwrap_or(d.rtol), "rtol")?;
        let atol = positive(self.atol.unwrap_or(d.atol), "atol")?;
        Ok(IntegratorConfig::with_tolerances(rtol, atol))
    }
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(field, format!("{v} is not a positive finite number")))
    }
}

fn plasma_system(s: Option<String>) -> Result<PlasmaSystem, CliError> {
    required(s, "system")?.parse().map_err(|e| usage("system", e))
}

fn initial_state(v: Option<Vec<f64>>, system: PlasmaSystem) -> Result<Vec<f64>, CliError> {
    let v = required(v, "init")?;
    if v.len() != system.dim() {
        return Err(usage(
            "init",
            format!("{} expects {} components ({}), got {}", system.name(), system.dim(), system.component_names().join(","), v.len()),
        ));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(usage("init", "components must be finite"));
    }
    Ok(v)
}

fn amplitude(v: f64, field: &str) -> Result<f64, CliError> {
    if v > 0.0 && v <= MAX_EPSILON {
        Ok(v)
    } else {
        Err(usage(field, format!("{v} outside (0, {MAX_EPSILON}]")))
    }
}

fn amplitude_grid(spec: Option<String>) -> Result<Vec<f64>, CliError> {
    let grid = io::parse_grid(&required(spec, "grid")?).map_err(|e| usage("grid", e))?;
    grid.iter().map(|&a| amplitude(a, "grid")).collect()
}

fn jobs(j: Option<usize>) -> Result<Option<usize>, CliError> {
    match j {
        Some(0) => Err(usage("jobs", "must be at least 1")),
        j => Ok(j),
    }
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateOpts {
    /// axisym2, electrostatic4, radial5 or full9
    #[arg(long)]
    pub system: Option<String>,
    /// Initial state, comma-separated in the system's component order
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Final time
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Final time as a number of periods of the orbit (axisym2 only)
    #[arg(long)]
    pub periods: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Length of a run: an explicit horizon or a number of orbit periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Time(f64),
    Periods(u32),
}

#[derive(Debug, Clone)]
pub struct Simulate {
    pub system: PlasmaSystem,
    pub init: Vec<f64>,
    pub horizon: Horizon,
    pub cfg: IntegratorConfig,
    pub out: Option<PathBuf>,
}

impl SimulateOpts {
    pub fn or(self, file: Self) -> Self {
        Self {
            system: self.system.or(file.system),
            init: self.init.or(file.init),
            t_max: self.t_max.or(file.t_max),
            periods: self.periods.or(file.periods),
            tol: self.tol.or(file.tol),
            out: self.out.or(file.out),
        }
    }

    pub fn validate(self) -> Result<Simulate, CliError> {
        let system = plasma_system(self.system)?;
        let init = initial_state(self.init, system)?;
        let horizon = match (self.t_max, self.periods) {
            (Some(_), Some(_)) => return Err(usage("periods", "cannot be combined with `t-max`")),
            (Some(t), None) => Horizon::Time(positive(t, "t-max")?),
            (None, Some(0)) => return Err(usage("periods", "must be at least 1")),
            (None, Some(p)) if system == PlasmaSystem::Axisym2 => Horizon::Periods(p),
            (None, Some(_)) => return Err(usage("periods", "only available for axisym2")),
            (None, None) => return Err(usage("t-max", "missing (or pass `periods`)")),
        };
        Ok(Simulate { system, init, horizon, cfg: self.tol.integrator()?, out: self.out })
    }
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PeriodOpts {
    /// Single amplitude A(0) in (0, 0.499]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Amplitude grid start:stop:step
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Period {
    pub amplitudes: Vec<f64>,
    pub cfg: IntegratorConfig,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl PeriodOpts {
    pub fn or(self, file: Self) -> Self {
        Self {
            eps: self.eps.or(file.eps),
            grid: self.grid.or(file.grid),
            tol: self.tol.or(file.tol),
            jobs: self.jobs.or(file.jobs),
            out: self.out.or(file.out),
        }
    }

    pub fn validate(self) -> Result<Period, CliError> {
        let amplitudes = match (self.eps, self.grid) {
            (Some(_), Some(_)) => return Err(usage("eps", "cannot be combined with `grid`")),
            (Some(e), None) => vec![amplitude(e, "eps")?],
            (None, g @ Some(_)) => amplitude_grid(g)?,
            (None, None) => return Err(usage("eps", "missing (or pass `grid`)")),
        };
        Ok(Period { amplitudes, cfg: self.tol.integrator()?, jobs: jobs(self.jobs)?, out: self.out })
    }
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScanOpts {
    /// axisym2, electrostatic4, radial3 or full9
    #[arg(long)]
    pub system: Option<String>,
    /// Amplitude grid start:stop:step
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script plotting |lambda_i| against A*
    #[arg(long)]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub system: VariationalSystem,
    pub grid: Vec<f64>,
    pub cfg: IntegratorConfig,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub plot_script: Option<PathBuf>,
}

impl ScanOpts {
    pub fn or(self, file: Self) -> Self {
        Self {
            system: self.system.or(file.system),
            grid: self.grid.or(file.grid),
            tol: self.tol.or(file.tol),
            jobs: self.jobs.or(file.jobs),
            out: self.out.or(file.out),
            plot_script: self.plot_script.or(file.plot_script),
        }
    }

    pub fn validate(self) -> Result<Scan, CliError> {
        let system = required(self.system, "system")?.parse().map_err(|e| usage("system", e))?;
        Ok(Scan {
            system,
            grid: amplitude_grid(self.grid)?,
            cfg: self.tol.integrator()?,
            jobs: jobs(self.jobs)?,
            out: self.out,
            plot_script: self.plot_script,
        })
    }
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BlowupOpts {
    /// axisym2, electrostatic4, radial5 or full9
    #[arg(long)]
    pub system: Option<String>,
    /// Initial state, comma-separated in the system's component order
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Horizon of the run
    #[arg(long)]
    pub t_max: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
    /// Output JSON report path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the time series (t, components, norm) as CSV
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Blowup {
    pub system: PlasmaSystem,
    pub init: Vec<f64>,
    pub t_max: f64,
    pub cfg: IntegratorConfig,
    pub out: Option<PathBuf>,
    pub series: Option<PathBuf>,
}

impl BlowupOpts {
    pub fn or(self, file: Self) -> Self {
        Self {
            system: self.system.or(file.system),
            init: self.init.or(file.init),
            t_max: self.t_max.or(file.t_max),
            tol: self.tol.or(file.tol),
            out: self.out.or(file.out),
            series: self.series.or(file.series),
        }
    }

    pub fn validate(self) -> Result<Blowup, CliError> {
        let system = plasma_system(self.system)?;
        let init = initial_state(self.init, system)?;
        if !(system.density(&init) > 0.0) {
            return Err(usage("init", "density must be positive at the start"));
        }
        Ok(Blowup {
            system,
            init,
            t_max: positive(required(self.t_max, "t-max")?, "t-max")?,
            cfg: self.tol.integrator()?,
            out: self.out,
            series: self.series,
        })
    }
}

#[derive(Args, Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpectrumOpts {
    /// Magnetic field values, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bz0: Option<Vec<f64>>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub bz0: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl SpectrumOpts {
    pub fn or(self, file: Self) -> Self {
        Self { bz0: self.bz0.or(file.bz0), out: self.out.or(file.out) }
    }

    pub fn validate(self) -> Result<Spectrum, CliError> {
        let bz0 = required(self.bz0, "bz0")?;
        if bz0.is_empty() || !bz0.iter().all(|b| b.is_finite()) {
            return Err(usage("bz0", "expected one or more finite numbers"));
        }
        Ok(Spectrum { bz0, out: self.out })
    }
}

/// Sections of a config file, one per subcommand.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    #[serde(default)]
    pub simulate: SimulateOpts,
    #[serde(default)]
    pub period: PeriodOpts,
    #[serde(default)]
    pub floquet_scan: ScanOpts,
    #[serde(default)]
    pub blowup: BlowupOpts,
    #[serde(default)]
    pub spectrum: SpectrumOpts,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage("config", format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage("config", format!("{}: {}", path.display(), e.message())))
    }
}
