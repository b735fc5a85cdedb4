use std::process::ExitCode;

use clap::Parser;
use dro_cli::{exit, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("JSON values serialize")
            );
            match outcome.tolerance_failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(exit::TOLERANCE)
                }
                None => ExitCode::from(exit::SUCCESS),
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code())
        }
    }
}
