use std::process::ExitCode;

use clap::Parser;
use dqsense::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(m) => {
            println!("{}: wrote {} files to {}", m.subcommand, m.outputs.len() + 1, m.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
