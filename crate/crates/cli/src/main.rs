use std::process::ExitCode;

use citesim_cli::Cli;
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.run() {
        Ok(outcome) => {
            for n in &outcome.notices {
                eprintln!("note: {n}");
            }
            println!("{}: wrote {}", outcome.manifest.stage, outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
