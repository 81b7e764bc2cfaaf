use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use recycle_nls::cli_io::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if cli.out_path().is_none() {
                let _ = std::io::stdout().write_all(out.body.as_bytes());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
