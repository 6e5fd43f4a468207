//! `coldplasma` command-line tool.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{BLOWUP_SCHEMA, PERIOD_SCHEMA, SCAN_SCHEMA, SIMULATE_SCHEMA, SPECTRUM_SCHEMA};
use config::{BlowupOpts, CliError, FileConfig, PeriodOpts, ScanOpts, SimulateOpts, SpectrumOpts};

/// Affine cold-plasma oscillations: trajectories, periods, Floquet scans
/// and blow-up experiments.
#[derive(Parser, Debug)]
#[command(name = "coldplasma", version)]
struct Cli {
    /// TOML file with one section per subcommand ([simulate], [period],
    /// [floquet-scan], [blowup], [spectrum]); flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory and write it as CSV
    #[command(after_help = SIMULATE_SCHEMA, allow_negative_numbers = true)]
    Simulate(SimulateOpts),
    /// Period of the axisymmetric oscillation by quadrature, event and asymptotics
    #[command(after_help = PERIOD_SCHEMA, allow_negative_numbers = true)]
    Period(PeriodOpts),
    /// Characteristic multipliers over a grid of amplitudes
    #[command(after_help = SCAN_SCHEMA, allow_negative_numbers = true)]
    FloquetScan(ScanOpts),
    /// Run until blow-up or the horizon and report the verdict as JSON
    #[command(after_help = BLOWUP_SCHEMA, allow_negative_numbers = true)]
    Blowup(BlowupOpts),
    /// Eigenvalues of the linearization at the equilibrium
    #[command(after_help = SPECTRUM_SCHEMA, allow_negative_numbers = true)]
    Spectrum(SpectrumOpts),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(o) => commands::simulate(o.or(file.simulate).validate()?),
        Command::Period(o) => commands::period(o.or(file.period).validate()?),
        Command::FloquetScan(o) => commands::floquet_scan(o.or(file.floquet_scan).validate()?),
        Command::Blowup(o) => commands::blowup(o.or(file.blowup).validate()?),
        Command::Spectrum(o) => commands::spectrum(o.or(file.spectrum).validate()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            // keep the diagnostic to one line
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
