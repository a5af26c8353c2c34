use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use fracvort::cli::{error_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout).context("fracvort failed") {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref().map_or(1, error_code);
            ExitCode::from(code)
        }
    }
}
