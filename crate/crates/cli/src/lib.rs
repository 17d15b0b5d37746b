//! `gksl`: runs moment propagation, oracle evolution, comparisons and
//! stationarity checks from JSON scenario files.
//!
//! Time is dimensionless throughout.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Outcome, Settings};
pub use error::CliError;
pub use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "gksl", version, about = "Closed-form moments and oracle checks for quadratic dephasing generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the scenario's comparison or stationarity tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent time points and instances.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form moment trajectories.
    Propagate,
    /// Density-matrix evolution in the truncated Fock space.
    Oracle,
    /// Closed form against oracle, with a pass/fail verdict.
    Compare,
    /// Commutator residuals of the scenario's Gaussian state.
    Stationary,
    /// Random instances of the operator identities.
    VerifyLemmas {
        /// Instances per identity.
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Input("--config <path> is required".into()))?;
    let scenario = Scenario::load(path)?;
    if cli.jobs == 0 {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {} worker thread(s): {e}", cli.jobs)))?;
    let settings = Settings {
        out: cli.out.clone(),
        tolerance: cli.tolerance,
        seed: cli.seed,
        instances: match cli.command {
            Command::VerifyLemmas { instances } => instances,
            _ => 0,
        },
    };
    pool.install(|| match cli.command {
        Command::Propagate => commands::propagate(&scenario, &settings),
        Command::Oracle => commands::oracle(&scenario, &settings),
        Command::Compare => commands::compare(&scenario, &settings),
        Command::Stationary => commands::stationary(&scenario, &settings),
        Command::VerifyLemmas { .. } => commands::verify_lemmas(&scenario, &settings),
    })
}
