//! Command-line entry point: parse a strict JSON run configuration,
//! dispatch to the library, write CSV/VTK artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use phasefield::config::{Command, RunConfig};
use phasefield::error::{Error, Result};
use phasefield::runner;

/// Diffuse-interface bending-energy solver with a connectedness
/// constraint, plus its verification commands.
#[derive(Parser)]
#[command(name = "solver", version)]
struct Args {
    /// One of: profile-check, recover, energy, inner, flow, sweep,
    /// components.
    command: String,

    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Worker threads (0 = auto); overrides the config's "threads" key.
    #[arg(long)]
    threads: Option<usize>,
}

fn real_main(args: &Args) -> Result<()> {
    let cmd: Command = args.command.parse()?;
    let cfg = RunConfig::load(&args.config)?;
    let threads = runner::resolve_threads(args.threads, &cfg);
    runner::install_thread_pool(threads)?;
    let out_dir = args
        .output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            Error::Config("no output directory: pass --output or set output_dir".into())
        })?;
    runner::run(cmd, &cfg, &out_dir)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match real_main(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
