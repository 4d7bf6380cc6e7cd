//! Command-line front end for the disclosure game solver.
//!
//! The binary is a thin wrapper over [`run`]; everything it does is also
//! reachable from here so the workflows can be driven from tests.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, Status};

#[derive(Debug, Parser)]
#[command(
    name = "disclosure",
    version,
    about = "Equilibria of strategic disclosure games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for both the solver restarts and the simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of messages; overrides `game.n`.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for an equilibrium and write `solve.json`.
    Solve,
    /// Write kernel and loss curves to `curves.csv`.
    Curves,
    /// Simulate the equilibrium and compare with the analytic loss.
    Simulate {
        /// Reuse the equilibrium from an earlier `solve.json`.
        #[arg(long, value_name = "PATH")]
        equilibrium: Option<PathBuf>,
    },
    /// Solve for each message count and write `sweep.csv`.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        n_list: Vec<usize>,
    },
    /// Run the property suite and write `check.json`.
    Check {
        #[arg(long, hide = true)]
        inject_fault: Option<checks::Fault>,
    },
}

/// Loads the configuration and applies command-line overrides.
pub fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <PATH> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
        cfg.simulation.seed = seed;
    }
    if let Some(n) = common.n {
        cfg.game.n = n;
    }
    Ok(cfg)
}

pub fn execute(command: &Command, cfg: &RunConfig) -> Result<commands::Outcome, CliError> {
    match command {
        Command::Solve => commands::solve(cfg),
        Command::Curves => commands::curves(cfg),
        Command::Simulate { equilibrium } => commands::simulate_cmd(cfg, equilibrium.as_deref()),
        Command::Sweep { n_list } => commands::sweep(cfg, n_list),
        Command::Check { inject_fault } => commands::check(
            cfg,
            checks::CheckOptions {
                fault: *inject_fault,
            },
        ),
    }
}

/// Runs one command, printing its summary and any error.
pub fn run(cli: &Cli) -> Status {
    let outcome = load_config(&cli.common).and_then(|cfg| execute(&cli.command, &cfg));
    match outcome {
        Ok(outcome) => {
            if !cli.common.quiet || outcome.status != Status::Success {
                // a closed pipe is not worth a different exit status
                let mut out = io::stdout().lock();
                for line in &outcome.lines {
                    if writeln!(out, "{line}").is_err() {
                        break;
                    }
                }
            }
            outcome.status
        }
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            e.status()
        }
    }
}
