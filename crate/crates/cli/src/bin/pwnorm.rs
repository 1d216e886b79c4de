use std::process::ExitCode;

use clap::Parser;
use pwnorm_cli::{run_and_write, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_and_write(&cli) {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
