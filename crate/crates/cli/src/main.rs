mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};
use config::RunConfig;

/// Nonlocal Allen-Cahn laboratory.
#[derive(Debug, Parser)]
#[command(name = "nalab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `outDir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Standing wave, speed constant and corrector.
    Profile,
    /// One run of the field solver.
    Simulate,
    /// Limit interface: radial law or level set.
    Interface,
    /// Epsilon sweep selected by `study`.
    Study,
    /// Sub/super-solution pair checks against a solver run.
    Verify,
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let Some(path) = &cli.config else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let mut config = load(&cli)?;
    if cli.out.is_some() {
        config.out_dir = cli.out.clone();
    }
    if cli.workers.is_some() {
        config.workers = cli.workers;
    }
    if let Some(n) = config.workers {
        if n == 0 {
            return Err(Failure::Config("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let out = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("nalab-out"));
    commands::ensure_dir(&out)?;
    let hash = config.hash();
    let cx = Context { config, out, hash };
    match cli.command {
        Command::Profile => commands::profile(&cx),
        Command::Simulate => commands::simulate(&cx),
        Command::Interface => commands::interface(&cx),
        Command::Study => commands::study(&cx),
        Command::Verify => commands::verify(&cx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("nalab: {}", failure.message());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
