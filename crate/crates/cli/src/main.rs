//! `hypersim`: a command-line workbench over the simulators.
//!
//! Every subcommand prints a text report by default and a JSON document
//! with `--format json`. Reports depend only on the arguments (and the
//! seed, where one is taken), never on timing or worker count.

mod ait;
mod hier;
mod machines;
mod oracle;
mod report;
mod trace;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use report::{Failure, Report};

#[derive(Parser)]
#[command(
    name = "hypersim",
    version,
    about = "Budgeted simulators for Turing machines and beyond"
)]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Upper bound on worker threads.
    #[arg(long, global = true, env = "HYPERSIM_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a machine. Exit 0 on a halt, 2 on a proof of non-halting, 3 when
    /// the budget runs out.
    Run(machines::RunArgs),
    /// Transfinite runs.
    #[command(subcommand)]
    Ordinal(machines::OrdinalCmd),
    /// Oracle machines, the halting oracle and dovetailed stages.
    #[command(subcommand)]
    Oracle(oracle::OracleCmd),
    /// Run a machine fed by an input channel.
    Coupled(oracle::CoupledArgs),
    /// Run machines sharing one tape on their own clocks.
    Async(machines::AsyncArgs),
    /// Run a machine whose writes are corrupted on a schedule.
    Errors(machines::ErrorsArgs),
    /// Estimate output frequencies of a coin-flipping machine.
    Prob(machines::ProbArgs),
    /// Nondeterministic trees and the bounded halting function.
    #[command(subcommand)]
    Nondet(machines::NondetCmd),
    /// Arithmetical-hierarchy tools and the capability report.
    #[command(subcommand)]
    Hier(hier::HierCmd),
    /// Program-size complexity, halting probability bounds, shift function.
    #[command(subcommand)]
    Ait(ait::AitCmd),
    /// The full acceptance battery plus the capability report.
    Suite,
}

fn configure_workers(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::config("worker count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot set up workers: {e}")))?;
    }
    Ok(())
}

fn dispatch(command: Command, format: Format) -> Result<Report, Failure> {
    match command {
        Command::Run(a) => machines::run(a, format),
        Command::Ordinal(c) => machines::ordinal(c),
        Command::Oracle(c) => oracle::oracle(c),
        Command::Coupled(a) => oracle::coupled(a),
        Command::Async(a) => machines::network(a),
        Command::Errors(a) => machines::errors(a),
        Command::Prob(a) => machines::prob(a),
        Command::Nondet(c) => machines::nondet(c),
        Command::Hier(c) => hier::hier(c),
        Command::Ait(c) => ait::ait(c),
        Command::Suite => hier::suite(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers(cli.workers).and_then(|()| dispatch(cli.command, cli.format));
    match result {
        Ok(report) => {
            report.print(cli.format);
            ExitCode::from(report.code)
        }
        Err(f) => {
            f.print(cli.format);
            ExitCode::from(1)
        }
    }
}
