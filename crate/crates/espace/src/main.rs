//! `espace` — scenario runner for the two-field risk-domain model.
//!
//! ```text
//! espace <steady|dispersion|mode|simulate|aggregate> --config <path> [--out <dir>] [--seed <u64>]
//! ```
//!
//! The subcommand must match the single command section present in the
//! config file. Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O.

use clap::{Parser, Subcommand};
use espace::scenario::{self, Command, ScenarioError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "espace",
    version,
    about = "Transaction-field scenarios on the risk square"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
    /// Scenario config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed; overrides the config's `rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Tabulate the steady-state fields on the risk square.
    Steady,
    /// Sweep wave numbers and solve the dispersion relation.
    Dispersion,
    /// Construct one analytic wave mode and emit its depth profile.
    Mode,
    /// Integrate the linearized potential system in time.
    Simulate,
    /// Bin transaction events into a field grid.
    Aggregate,
}

impl CliCommand {
    fn expected(&self) -> Command {
        match self {
            CliCommand::Steady => Command::Steady,
            CliCommand::Dispersion => Command::Dispersion,
            CliCommand::Mode => Command::Mode,
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Aggregate => Command::Aggregate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            println!(
                "{}: wrote {} file(s) in {:.3}s",
                manifest.command,
                manifest.outputs.len() + 1,
                manifest.wall_time_s
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<scenario::RunManifest, ScenarioError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| ScenarioError::BadSection {
            section: "cli",
            message: "--config <path> is required".into(),
        })?;
    let text = std::fs::read_to_string(config_path).map_err(|source| ScenarioError::Io {
        path: config_path.clone(),
        source,
    })?;
    let config = scenario::parse_config(&text)?;
    let configured = config.command()?;
    let requested = cli.command.expected();
    if configured != requested {
        return Err(ScenarioError::CommandMismatch {
            requested: requested.name(),
            configured: configured.name(),
        });
    }
    scenario::run_scenario(&config, cli.out.as_deref(), cli.seed)
}
