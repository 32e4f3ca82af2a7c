use std::process::ExitCode;

use clap::Parser;
use pendulum_cli::{init_workers, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|()| run(&cli));
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
