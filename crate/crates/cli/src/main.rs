use std::process::ExitCode;

use clap::Parser;
use dual_elasticity_cli::{parse_config, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&config, &mut stdout) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
