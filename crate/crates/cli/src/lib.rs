//! Command-line front end: JSON config in, CSV/JSON files out.

pub mod commands;
pub mod config;

use std::path::Path;

use clap::Subcommand;
use ot_dro_core::Result;

use crate::commands::Output;
use crate::config::Config;

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Robust SGD with the method chosen from the loss.
    Train,
    /// Robust vs non-robust gap curves on the same sample stream.
    Compare,
    /// Worst-case transport over a δ grid at fixed β.
    Worstcase,
    /// Rolling-window mean-variance frontier.
    Frontier,
    /// Derived constants of the smooth regime.
    Constants,
    /// Oracle suite with a pass/fail report.
    Check,
}

/// Runs one command and returns the files it wrote.
pub fn run(command: Command, config: Option<&Path>, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    let cfg = match config {
        Some(p) => Config::from_path(p)?,
        None => Config::from_json("{}")?,
    };
    let mut output = Output::new(out)?;
    match command {
        Command::Train => commands::train(&cfg, &mut output),
        Command::Compare => commands::compare(&cfg, &mut output),
        Command::Worstcase => commands::worstcase(&cfg, &mut output),
        Command::Frontier => commands::frontier(&cfg, &mut output),
        Command::Constants => commands::constants(&cfg, &mut output),
        Command::Check => commands::check(&cfg, &mut output),
    }?;
    Ok(output.written().to_vec())
}
