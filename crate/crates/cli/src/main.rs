use std::process::ExitCode;

use clap::Parser;
use strapkit_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match strapkit_cli::run(&cli) {
        Ok(outcome) if outcome.success() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
