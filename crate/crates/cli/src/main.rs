//! Command-line driver: ingest data, build workloads, run the attack and
//! baselines, evaluate match-rate curves, and run the enumeration oracle.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numeric
//! failures (optimizer aborts).

mod commands;

use clap::{Parser, Subcommand};
use commands::{attack, baseline, evaluate, oracle};

#[derive(Parser)]
#[command(
    name = "recon",
    version,
    about = "Reconstruct confidence-ranked dataset rows from aggregate statistics"
)]
struct Cli {
    /// Worker threads for parallel runs (default: RECON_JOBS, else all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reconstruction attack and write a confidence ranking.
    Attack(attack::AttackArgs),
    /// Build distributional baseline rankings.
    Baseline(baseline::BaselineArgs),
    /// Compute match-rate curves and reports for rankings.
    Evaluate(evaluate::EvaluateArgs),
    /// Exhaustive Bayesian checks on a tiny synthetic instance.
    Oracle(oracle::OracleArgs),
}

fn main() {
    let cli = Cli::parse();
    let jobs = cli.jobs.or_else(|| {
        std::env::var("RECON_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(jobs) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("recon: failed to configure {jobs} worker threads: {e}");
            std::process::exit(2);
        }
    }

    let result = match cli.command {
        Command::Attack(args) => attack::run(args),
        Command::Baseline(args) => baseline::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Oracle(args) => oracle::run(args),
    };
    if let Err(err) = result {
        eprintln!("recon: {err:#}");
        let code = match err.downcast_ref::<recon_core::Error>() {
            Some(core_err) if core_err.is_numeric_failure() => 3,
            _ => 2,
        };
        std::process::exit(code);
    }
}
