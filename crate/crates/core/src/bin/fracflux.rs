use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracflux::cli::{error_line, exit_code, run, Mode, RunConfig, RunOptions};

/// Forward solves and boundary-flux reconstruction for nonlinear
/// time-fractional diffusion.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// TOML run description.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mode`: forward, adjoint, invert or table.
    #[arg(long)]
    mode: Option<Mode>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// No progress output on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(m) = args.mode {
            cfg.mode = m;
        }
        if let Some(dir) = args.out {
            cfg.output.dir = dir;
        }
        if let Some(seed) = args.seed {
            cfg.noise.seed = seed;
        }
        run(&cfg, &RunOptions { quiet: args.quiet, threads: None })
    });
    match result {
        Ok(outcome) => {
            if !args.quiet {
                eprintln!("wrote {}", outcome.files.join(", "));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
