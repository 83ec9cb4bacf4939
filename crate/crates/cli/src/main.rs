use std::process::ExitCode;

use clap::Parser;
use pfs_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pfs {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
