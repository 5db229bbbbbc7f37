use std::process::ExitCode;

use clap::Parser;
use wcreg_cli::{run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match args.resolve().and_then(|config| run(&config)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
