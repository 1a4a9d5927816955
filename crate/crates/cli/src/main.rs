//! `nullspace` command-line front end.

mod analyze;
mod common;
mod laplacian;
mod solve;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "nullspace", version, about = "Null spaces of large sparse matrices by randomized block Lanczos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an orthonormal null-space basis of a Matrix Market matrix.
    Solve(solve::SolveArgs),
    /// Build the Laplacian of an edge-list graph.
    Laplacian(laplacian::LaplacianArgs),
    /// Verification experiments on small dense problems.
    Analyze(analyze::AnalyzeArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(common::EXIT_USAGE),
            };
        }
    };
    if let Err(e) = common::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(common::EXIT_USAGE);
    }
    let outcome = match cli.command {
        Command::Solve(args) => solve::run(&args),
        Command::Laplacian(args) => laplacian::run(&args),
        Command::Analyze(args) => analyze::run(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) if common::is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(common::exit_code(&e))
        }
    }
}
