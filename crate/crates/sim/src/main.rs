use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybd_sim::config::{resolve, PRESETS};
use hybd_sim::dump::dump_channels;
use hybd_sim::output::{csv_string, emit_csv, write_plot_script, write_trial_log};
use hybd_sim::sweep::{aggregate, run_trials, without_sweep};
use hybd_sim::validate::{report, run_invariants, ValidateOptions, DEFAULT_SEED};
use hybd_sim::{Result, SimError};

#[derive(Parser)]
#[command(name = "hybd", version, about = "Hybrid block diagonalization Monte-Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, ignoring any sweep section.
    Run(RunArgs),
    /// Run the scenario's sweep.
    Sweep(RunArgs),
    /// Check numerical invariants on random small instances.
    Validate {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write each trial's channel realization to a text file.
    Channels {
        /// Scenario file, or preset:<name>.
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of realizations.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// List built-in presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or preset:<name>.
    config: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Write a matplotlib script that draws the CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
    /// Write per-trial results as JSON lines.
    #[arg(long)]
    trial_log: Option<PathBuf>,
}

fn simulate(args: RunArgs, sweep: bool) -> Result<()> {
    let mut config = resolve(&args.config)?;
    if !sweep {
        config = without_sweep(&config);
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    config.validate()?;
    if args.plot_script.is_some() && args.out.is_none() {
        return Err(SimError::Config("--plot-script needs --out for the CSV path".into()));
    }
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let trials = run_trials(&config, threads)?;
    let table = aggregate(&config, &trials)?;
    let flagged = table.flagged_trials();
    if flagged > 0 {
        eprintln!("warning: {flagged} trial evaluations exceeded residual tolerances");
    }
    if let Some(path) = &args.trial_log {
        write_trial_log(&trials, path)?;
    }
    match &args.out {
        Some(path) => emit_csv(&table, path)?,
        None => {
            let text = csv_string(&table)?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| SimError::io("<stdout>", e))?;
        }
    }
    if let (Some(script), Some(csv)) = (&args.plot_script, &args.out) {
        write_plot_script(csv, script)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => simulate(args, false),
        Command::Sweep(args) => simulate(args, true),
        Command::Validate { seed } => {
            let checks = run_invariants(seed, ValidateOptions::default())?;
            let failures = report(&checks, &mut std::io::stdout().lock()).map_err(|e| SimError::io("<stdout>", e))?;
            if failures > 0 {
                return Err(SimError::Invariants(failures));
            }
            Ok(())
        }
        Command::Channels { config, out, trials } => {
            let mut config = resolve(&config)?;
            if let Some(t) = trials {
                config.trials = t;
            }
            config.validate()?;
            let written = dump_channels(&config, &out)?;
            eprintln!("wrote {} channel files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
