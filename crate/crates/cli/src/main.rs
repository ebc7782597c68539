//! `quiver` command-line interface: build, bench, analyze, update-bench,
//! and stats over a store directory. Machine-readable JSON goes to stdout
//! (one object per line); human summaries go to stderr.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure.

mod analyze;
mod bench;
mod build;
mod common;
mod stats;
mod update_bench;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quiver::error::Error;

#[derive(Parser)]
#[command(name = "quiver", version, about = "Disk-based vector search with decoupled compressed storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a complete store (segments, PQ, graph) from a dataset file.
    Build(build::BuildArgs),
    /// Run a query benchmark over a built store.
    Bench(bench::BenchArgs),
    /// Report dispersion and entropy metrics for a dataset file.
    Analyze(analyze::AnalyzeArgs),
    /// Run a streaming delete/insert/merge workload with concurrent queries.
    UpdateBench(update_bench::UpdateBenchArgs),
    /// Report the storage breakdown of a store directory.
    Stats(stats::StatsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(args) => build::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::UpdateBench(args) => update_bench::run(args),
        Command::Stats(args) => stats::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .downcast_ref::<Error>()
                .map(|e| matches!(e, Error::Usage(_) | Error::InfeasibleBudget { .. }))
                .unwrap_or(false);
            if usage {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
