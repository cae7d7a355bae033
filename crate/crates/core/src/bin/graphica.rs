use std::process::ExitCode;

use clap::Parser;
use graphica::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.category() == "usage" { 2 } else { 1 })
        }
    }
}
