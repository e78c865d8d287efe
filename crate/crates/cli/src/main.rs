//! `convopt` command-line driver.
//!
//! Usage: `convopt <task> --config <path> [--out <dir>] [--seed <u64>]`.
//! The task argument must match the `command.task` field of the
//! configuration. `CONVOPT_THREADS` caps the internal thread pool.
//!
//! Exit codes: 0 pass/converged, 1 failed check or non-convergence,
//! 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use convopt::config::RunConfig;
use convopt::tasks;

#[derive(Parser)]
#[command(
    name = "convopt",
    version,
    about = "Optimal control of semilinear convection-diffusion equations"
)]
struct Cli {
    /// Task to run; must match command.task in the configuration
    /// (solve-state, optimize, check-gradient, check-hessian,
    /// comparison-suite, convergence-study, diagnose-coercivity,
    /// growth-check)
    task: String,
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir from the configuration
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for all randomized checks
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let thread_cap = match std::env::var("CONVOPT_THREADS") {
        Ok(s) => match s.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the pool may already be installed
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                Some(n)
            }
            _ => {
                eprintln!("invalid CONVOPT_THREADS value '{s}': expected a positive integer");
                return ExitCode::from(2);
            }
        },
        Err(_) => None,
    };

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if cli.task != cfg.task_name() {
        eprintln!(
            "task mismatch: command line requests '{}' but the config declares '{}'",
            cli.task,
            cfg.task_name()
        );
        return ExitCode::from(2);
    }

    let seed = cli.seed.unwrap_or(0);
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));

    match tasks::run(&cfg, seed, &out_dir, thread_cap) {
        Ok(outcome) => {
            println!("{}: {}", cfg.task_name(), outcome.status);
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
