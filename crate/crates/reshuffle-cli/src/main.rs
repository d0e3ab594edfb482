//! Command-line front end for the experiment harness.
//!
//! `reshuffle run <config>` executes a TOML experiment config and prints the
//! written files; `validate` checks a config without running it;
//! `oracle-check` compares the fast offspring-selection optimizers against
//! exhaustive enumeration.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use reshuffle::experiment::{
    oracle_check, parse_config, run_experiment, KL_ORACLE_TOLERANCE, TV_ORACLE_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "reshuffle",
    version,
    about = "Sequential Monte Carlo experiments with deterministic offspring selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV tables and manifest.
    Run(RunArgs),
    /// Parse and validate a config, printing a summary of the grid.
    Validate(ValidateArgs),
    /// Compare the greedy and rounding optimizers against brute force.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML experiment config.
    config: PathBuf,
    /// Write outputs here instead of the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replace the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker thread count; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Path to the TOML experiment config.
    config: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Largest population size to draw.
    #[arg(long, default_value_t = 8)]
    max_s: usize,
    /// Number of random weight vectors to check.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Seed for the random weight vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            if let Some(threads) = args.threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .context("configuring the worker pool")?;
            }
            let mut config = parse_config(&args.config)
                .with_context(|| format!("loading {}", args.config.display()))?;
            if let Some(output_dir) = args.output_dir {
                config.output_dir = output_dir;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let written = run_experiment(&config)?;
            for path in &written {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let config = parse_config(&args.config)
                .with_context(|| format!("loading {}", args.config.display()))?;
            println!("ok: {}", config.experiment);
            println!("  seed        {}", config.seed);
            println!("  replicates  {}", config.replicates);
            println!("  particles   {:?}", config.particle_counts);
            println!("  steps       {:?}", config.step_counts);
            let schemes: Vec<&str> = config.schemes.iter().map(|s| s.name()).collect();
            println!("  schemes     {}", schemes.join(" "));
            println!("  output dir  {}", config.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck(args) => {
            let report = oracle_check(args.max_s, args.cases, args.seed)?;
            println!(
                "checked {} random weight vectors with 2..={} offspring",
                report.cases, report.max_offspring
            );
            println!(
                "kl objective gap {:.3e} (tolerance {:.1e})",
                report.max_kl_gap, KL_ORACLE_TOLERANCE
            );
            println!(
                "tv objective gap {:.3e} (tolerance {:.1e})",
                report.max_tv_gap, TV_ORACLE_TOLERANCE
            );
            println!(
                "tv counts within rounding bracket: {}",
                report.tv_counts_bracketed
            );
            if report.passed() {
                println!("oracle check passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("oracle check FAILED");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
