use std::process::ExitCode;

use clap::Parser;
use eigenframe::cli::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = RunConfig::from_cli(cli).and_then(|config| run(&config));
    match outcome {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.status as u8)
        }
        Err(err) => {
            eprintln!("error: {}: {err}", err.code());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
