//! Experiment front end for the rate-independent optimal control library.
//!
//! One invocation runs one experiment against one scenario configuration
//! and writes machine-readable artifacts (trajectory files, CSV tables,
//! JSON reports) for external plotting. Outputs are deterministic: the
//! same configuration produces byte-identical files.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 solver
//! failure, 4 check failure (`grad-check`, `verify-kkt`).

mod commands;
mod config;
mod error;
mod io;

use clap::{Args, Parser, Subcommand};
use commands::CommonArgs;
use error::{config_error, CliError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ripvisc",
    about = "Optimal control of a rate-independent evolution via viscous smoothing",
    version,
    max_term_width = 100
)]
struct Cli {
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// Scenario configuration file (dotted-key text; defaults apply when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Viscosity override for single-solve commands
    #[arg(long, global = true, value_name = "X")]
    rho: Option<f64>,
    /// Suppress progress and summary lines on stdout
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward evolution and write the state trajectory
    SolveState {
        /// Smoothed solver at the scenario viscosity (the default)
        #[arg(long, conflicts_with = "reference")]
        regularized: bool,
        /// Exact active-set solver of the unsmoothed evolution
        #[arg(long)]
        reference: bool,
    },
    /// Solve forward and adjoint systems; write state, multipliers and gradient
    SolveAdjoint,
    /// Compare the adjoint gradient against central difference quotients
    GradCheck {
        /// Difference steps (comma separated; overrides gradcheck.eps)
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Minimize the objective by warm-started viscosity continuation
    Optimize,
    /// Sweep viscosities and measure the distance to the exact solver
    RateStudy,
    /// Audit the optimality system and a-priori estimates of a solve
    VerifyKkt {
        /// Audit an optimize output directory instead of a configuration
        #[arg(long, value_name = "DIR", conflicts_with = "config")]
        bundle: Option<PathBuf>,
    },
}

/// Honors `RIPVISC_THREADS` before any solver can spawn workers.
fn cap_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RIPVISC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| config_error(format!("RIPVISC_THREADS=`{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(format!("cannot configure {n} worker thread(s): {e}")))
}

fn load_scenario(flags: &CommonFlags) -> Result<config::Scenario, CliError> {
    match &flags.config {
        None => config::parse_scenario("", Path::new(".")),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().filter(|p| !p.as_os_str().is_empty());
            config::parse_scenario(&text, base.unwrap_or(Path::new(".")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    cap_threads()?;
    let scenario = load_scenario(&cli.common)?;
    let out_dir = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&scenario.out_dir));
    let args = CommonArgs {
        scenario,
        out_dir,
        rho_override: cli.common.rho,
        quiet: cli.common.quiet,
    };
    match &cli.command {
        Command::SolveState { reference, .. } => commands::solve_state(&args, *reference),
        Command::SolveAdjoint => commands::solve_adjoint_cmd(&args),
        Command::GradCheck { eps } => commands::grad_check(&args, eps.clone()),
        Command::Optimize => commands::optimize(&args),
        Command::RateStudy => commands::rate_study_cmd(&args),
        Command::VerifyKkt { bundle } => commands::verify_kkt(&args, bundle.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
