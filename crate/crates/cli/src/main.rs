use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ot_dro::{run, Command};

#[derive(Debug, Parser)]
#[command(name = "ot-dro", version, about = "Distributionally robust learning with state-dependent transport costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat JSON configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, cli.config.as_deref(), &cli.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
