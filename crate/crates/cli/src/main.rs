//! `roadfield`: spreading speeds, simulations and steady-state comparisons
//! for the road-field SIR model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Sink;
use crate::config::{parse_config, validate_run_id, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "roadfield", version, about = "Road-field SIR epidemic propagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spreading speeds, decay exponents and reduced parameters.
    Speed(Common),
    /// Time integration with snapshots, front trace and speed fit.
    Simulate(Common),
    /// Long-time relaxation to the steady state.
    Steady(Common),
    /// Road-field against no-road steady states: regions and balances.
    Compare(Common),
    /// Repeat `speed` (optionally `simulate`) along one parameter axis.
    Sweep(Common),
    /// Tabulate the reduced speed limit curve.
    Omega(OmegaArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OmegaArgs {
    /// JSON run configuration; defaults are used without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run identifier used as file prefix (overrides `output.run_id`).
    #[arg(long)]
    run_id: Option<String>,
    /// Reuse a run id that already has outputs in the directory.
    #[arg(long)]
    overwrite: bool,
}

fn load(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
    parse_config(&text)
}

/// Default configuration for `omega` runs without a document.
fn omega_default() -> RunConfig {
    parse_config(
        r#"{"mode": "roadfield_uv",
            "params": {"d": 1, "D": 10, "alpha": 1, "beta": 2, "mu": 1, "nu": 1, "s0": 1},
            "grid": {"lx": 20, "ly": 5, "h": 0.5}}"#,
    )
    .expect("built-in configuration is valid")
}

fn prepare(mut config: RunConfig, out: &OutArgs) -> Result<(RunConfig, Sink), CliError> {
    if let Some(dir) = &out.out {
        config.output.dir = dir.clone();
    }
    if let Some(id) = &out.run_id {
        validate_run_id(id).map_err(|reason| CliError::Config { path: "--run-id".into(), reason })?;
        config.output.run_id = id.clone();
    }
    let sink = Sink::claim(&config.output.dir, &config.output.run_id, out.overwrite)?;
    sink.echo_config(&config)?;
    Ok((config, sink))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (config, out, cmd): (RunConfig, &OutArgs, Handler) = match &cli.command {
        Command::Speed(c) => (load(&c.config)?, &c.out, commands::cmd_speed),
        Command::Simulate(c) => (load(&c.config)?, &c.out, commands::cmd_simulate),
        Command::Steady(c) => (load(&c.config)?, &c.out, commands::cmd_steady),
        Command::Compare(c) => (load(&c.config)?, &c.out, commands::cmd_compare),
        Command::Sweep(c) => (load(&c.config)?, &c.out, commands::cmd_sweep),
        Command::Omega(c) => {
            let config = match &c.config {
                Some(path) => load(path)?,
                None => omega_default(),
            };
            (config, &c.out, commands::cmd_omega)
        }
    };
    let (config, sink) = prepare(config, out)?;
    cmd(&config, &sink)
}

type Handler = fn(&RunConfig, &Sink) -> Result<(), CliError>;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
