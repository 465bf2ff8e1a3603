use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use ration_cli::config::BackendKind;
use ration_cli::experiment::log_digest;
use ration_cli::{emit_outputs, run_experiment, CliError, ExperimentConfig};
use ration_core::forecast::{default_household, synth_household, write_csv};
use ration_core::model::TimeGrid;

/// Threshold-based rationing for prepaid electricity wallets.
///
/// Exit status: 0 on success, 2 for configuration errors, 3 for data
/// errors, 1 otherwise.
#[derive(Debug, Parser)]
#[command(name = "ration", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run the budget × forecast × policy sweep and write CSV reports.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// External MILP solver template with `{lp}` and `{sol}`; switches
        /// the DFM backend to external.
        #[arg(long)]
        solver_cmd: Option<String>,
        /// Day-shuffle seed for imperfect forecasts; overrides `shuffle_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic four-load household demand CSV.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        days: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        step_minutes: u32,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Run { config, out, solver_cmd, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            if let Some(cmd) = solver_cmd {
                cfg.dfm_backend.kind = BackendKind::External;
                cfg.dfm_backend.command = Some(cmd);
            }
            if let Some(seed) = seed {
                cfg.shuffle_seed = seed;
            }
            let results = run_experiment(&cfg)?;
            log_digest(&results);
            let unsolved = results.cells.iter().filter(|c| c.sim.is_none()).count();
            if unsolved > 0 {
                warn!("{unsolved} cells unsolved");
            }
            let files = emit_outputs(&results, &cfg.output_dir)?;
            info!("wrote {} files to {}", files.len(), cfg.output_dir.display());
            println!("{}", cfg.output_dir.join("summary.csv").display());
        }
        Cmd::Synth { seed, days, out, step_minutes } => {
            let grid = TimeGrid::from_step_minutes(step_minutes, days).map_err(|e| CliError::Config(e.to_string()))?;
            let (loads, profiles) = default_household();
            let demand = synth_household(seed, &loads, grid, &profiles).map_err(|e| CliError::Data(e.to_string()))?;
            write_csv(&demand, &loads, &out).map_err(|e| CliError::Run(e.to_string()))?;
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!(
                "ok: {} fractions x {} regimes x {} policies",
                cfg.budget_fractions.len(),
                cfg.forecast_regimes.len(),
                cfg.policies.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
