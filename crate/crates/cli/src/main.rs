//! `qhd`: command-line front end for the quantum hard-disk simulator.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;
use qhd_core::Error;

#[derive(Debug, Parser)]
#[command(name = "qhd", version, about = "Quantum hard disks on an open square lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count the valid configurations of an (L, M) sector
    Basis(Params),
    /// Decompose an (L, M) sector into fragments
    Fragments(Params),
    /// Largest-fragment ratio for every particle number at fixed L
    Scan(Params),
    /// Real-time evolution of a scenario and its autocorrelation G(t)
    Evolve(Params),
    /// Eigenstate entropy and order parameter for a sector
    Spectrum(Params),
    /// Classical constrained random walk from a scenario
    Classical(Params),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Capacity { .. } => 3,
        Error::Numeric(_) => 4,
        Error::Io(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, params) = match cli.command {
        Command::Basis(p) => ("basis", p),
        Command::Fragments(p) => ("fragments", p),
        Command::Scan(p) => ("scan", p),
        Command::Evolve(p) => ("evolve", p),
        Command::Spectrum(p) => ("spectrum", p),
        Command::Classical(p) => ("classical", p),
    };
    match commands::run(name, params) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
