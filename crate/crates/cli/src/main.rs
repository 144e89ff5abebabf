// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliResult;

fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a, cli.seed, cli.verbose),
        Command::Analyze(a) => commands::analyze_cmd(a, cli.verbose),
        Command::OptimizeDeadtime(a) => commands::optimize_cmd(a),
        Command::PlotData(a) => commands::plot_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|text| commands::write_output(cli.output.as_deref(), &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
