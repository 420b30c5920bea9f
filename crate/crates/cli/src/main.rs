//! `cdm-eit`: transmission spectra, STIRAP runs and closed-form tables for cold
//! three-level atom clouds.

mod commands;
mod config;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Command, Config, ConfigError};

/// Environment variable fixing the worker thread count.
const THREADS_VAR: &str = "CDM_EIT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "cdm-eit", version, about = "Coupled-dipole simulation of EIT and STIRAP in cold atom clouds")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file; defaults are used for everything it leaves out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest.json.
    #[arg(long, conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set cloud.density=0.002`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Disorder-averaged transmission spectrum and window metrics per kernel mode.
    Spectrum(RunArgs),
    /// Ensemble-mean populations during the STIRAP sequence per kernel mode.
    Stirap(RunArgs),
    /// Closed-form single-atom table over the detuning grid.
    Oracle(RunArgs),
    /// Spectra over a list of densities or thicknesses, with a summary table.
    Sweep(RunArgs),
    /// Check the model's invariants on small systems.
    Validate {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(vec![format!("{THREADS_VAR}: expected a positive integer, got `{raw}`")]))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn load(args: &RunArgs) -> anyhow::Result<Config> {
    match &args.from_manifest {
        Some(m) => Config::from_manifest(m, &args.overrides),
        None => Config::load(args.config.as_deref(), &args.overrides),
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    configure_threads()?;
    let (command, args) = match &cli.command {
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Stirap(a) => (Command::Stirap, a),
        Sub::Oracle(a) => (Command::Oracle, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Validate { seed, out } => return validate::run_validate(*seed, out),
    };
    let config = load(args)?;
    match command {
        Command::Spectrum => commands::run_spectrum(&config, &args.out),
        Command::Stirap => commands::run_stirap(&config, &args.out),
        Command::Oracle => commands::run_oracle(&config, &args.out),
        Command::Sweep => commands::run_sweep(&config, &args.out),
    }
}

/// Exit code of an error that ended the run early.
fn error_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<cdm_eit::Error>().map(cdm_eit::Error::root) {
        Some(cdm_eit::Error::InvalidParameter { .. } | cdm_eit::Error::Degenerate(_)) => 2,
        Some(
            cdm_eit::Error::NotConverged { .. }
            | cdm_eit::Error::StepSizeUnderflow { .. }
            | cdm_eit::Error::TooManySteps { .. }
            | cdm_eit::Error::NonFinite { .. },
        ) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
