use std::process::ExitCode;

use clap::Parser;
use glam_cli::alloc::CountingAlloc;
use glam_cli::args::{Cli, Command};
use glam_cli::{bench, fit, predict, simulate, EXIT_ERROR, EXIT_TRUNCATED};

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => fit::run(args).map(|truncated| if truncated { EXIT_TRUNCATED } else { 0 }),
        Command::Predict(args) => predict::run(args).map(|_| 0),
        Command::Simulate(args) => simulate::run(args).map(|_| 0),
        Command::Bench(args) => bench::run(args).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("glam: {err}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
