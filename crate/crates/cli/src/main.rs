use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmlab_cli::config::{DEFAULT_N_GRID, DEFAULT_PATHS};
use mmlab_cli::{run_scenario, ScenarioConfig, ScenarioKind, OUT_DIR_ENV};

const AFTER_HELP: &str = "\
Defaults (each overridable per field in the config):
  n_grid       [1, 2, 4, 8, 16]  ([2, 4, 8, 16] for reflected_family)
  paths        10000 Monte Carlo paths per ensemble
  times        [[0.25, 0.75]]
  dt           0.001
  start        {\"kind\": \"weighted\", \"c\": 1}

Exit status: 0 when every non-skipped check passes, 1 when a check fails or
the report is incomplete, 2 on invalid configs or I/O errors.";

#[derive(Parser)]
#[command(
    name = "lab",
    version,
    about = "Convergence experiments for Brownian motion on collapsing spaces"
)]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, one CSV per check and manifest.json.
    Run {
        config: PathBuf,
        /// Worker threads (results do not depend on this).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides $LAB_OUT_DIR and the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List the scenario kinds.
    ListScenarios,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            threads,
            out,
        } => run(config, threads, out),
        Command::Validate { config } => match ScenarioConfig::load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(issues) => {
                for issue in issues {
                    eprintln!("{}: {issue}", config.display());
                }
                ExitCode::from(2)
            }
        },
        Command::ListScenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<18} {}", kind.as_str(), kind.description());
            }
            println!("\ndefault n grid {DEFAULT_N_GRID:?}, {DEFAULT_PATHS} paths");
            ExitCode::SUCCESS
        }
    }
}

fn run(path: PathBuf, threads: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let config = match ScenarioConfig::load(&path) {
        Ok(c) => c,
        Err(issues) => {
            for issue in issues {
                eprintln!("{}: {issue}", path.display());
            }
            return ExitCode::from(2);
        }
    };
    let dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("lab-out").join(config.scenario.as_str()));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start {threads:?} worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match pool.install(|| run_scenario(&config)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write(&config, &dir) {
        eprintln!("cannot write {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    print!("{}", report.summary());
    println!("artifacts in {}", dir.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
