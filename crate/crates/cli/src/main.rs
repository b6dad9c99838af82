use std::process::ExitCode;

use clap::Parser;
use tenure_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match tenure_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::FAILURE
        }
    }
}
