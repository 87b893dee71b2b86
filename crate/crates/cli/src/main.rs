use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mia_cli::config::load_config;
use mia_cli::report::execute_report;
use mia_cli::run::{execute_generate_data, execute_run, render_summary};
use mia_cli::scenario::ScenarioSpec;
use mia_cli::sweep::{execute_sweep, render_sweep_csv};
use mia_cli::{CliError, CliResult};

/// Membership-inference audit toolkit.
#[derive(Parser)]
#[command(name = "mia-audit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the four dataset splits and normalization stats.
    GenerateData {
        /// JSON experiment config (built-in desk-scale defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full pipeline: prepare models, fit attacks, evaluate, write reports.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Scenario: standard, label-smoothing[:alpha], temperature[:t], l2[:lambda].
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Input-scaling sweep over the configured deltas.
    ScalingSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Consolidate completed runs into comparison tables and plot data.
    Report {
        /// Completed run directories.
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_out(
    flag: Option<PathBuf>,
    config_default: Option<PathBuf>,
    what: &str,
) -> CliResult<PathBuf> {
    flag.or(config_default).ok_or_else(|| {
        CliError::Usage(format!("{what} needs --out (or out_dir in the config)"))
    })
}

fn parse_scenario(raw: Option<&str>) -> CliResult<ScenarioSpec> {
    match raw {
        None => Ok(ScenarioSpec::Standard),
        Some(raw) => ScenarioSpec::parse(raw),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::GenerateData { config, out, seed } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let out = resolve_out(out, cfg.out_dir.clone(), "generate-data")?;
            execute_generate_data(&cfg, &out)?;
            println!("wrote datasets to {}", out.display());
            Ok(())
        }
        Command::Run {
            config,
            out,
            seed,
            scenario,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let scenario = parse_scenario(scenario.as_deref())?;
            let out = resolve_out(out, cfg.out_dir.clone(), "run")?;
            let output = execute_run(&cfg, &scenario, &out)?;
            print!("{}", render_summary(&output));
            println!("artifacts in {}", out.display());
            Ok(())
        }
        Command::ScalingSweep {
            config,
            out,
            seed,
            scenario,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let scenario = parse_scenario(scenario.as_deref())?;
            let out = resolve_out(out, cfg.out_dir.clone(), "scaling-sweep")?;
            let rows = execute_sweep(&cfg, &scenario, &out)?;
            print!("{}", render_sweep_csv(&rows));
            Ok(())
        }
        Command::Report { run_dirs, out } => {
            let comparison = execute_report(&run_dirs, &out)?;
            print!("{comparison}");
            println!("plot data in {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ CliError::Usage(_)) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
        Err(err @ CliError::Runtime(_)) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
