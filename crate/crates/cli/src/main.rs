use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dnf_cli::{check, run_modes, run_pipeline, PipelineConfig, PipelineError, RunSummary, THREADS_ENV};

/// Direct normal form reduced models and their frequency responses.
#[derive(Parser)]
#[command(name = "dnf-rom", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the system, solve modes and the reduced model, then trace every response curve.
    Run { config: PathBuf },
    /// Write modes.csv only.
    Modes { config: PathBuf },
    /// Verify eigen and homological residuals without writing files.
    Check { config: PathBuf },
}

fn configure_threads() -> Result<(), PipelineError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PipelineError::Config(format!("{THREADS_ENV}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<RunSummary, PipelineError> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => run_pipeline(&PipelineConfig::load(&config)?),
        Command::Modes { config } => run_modes(&PipelineConfig::load(&config)?),
        Command::Check { config } => check(&PipelineConfig::load(&config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let is_check = matches!(cli.command, Command::Check { .. });
    match execute(cli) {
        Ok(summary) => {
            if is_check {
                println!("{}", serde_json::to_string_pretty(&summary.report).unwrap_or_default());
            }
            for f in &summary.files {
                eprintln!("wrote {}", f.display());
            }
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                for f in &summary.failures {
                    eprintln!("error: {f}");
                }
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
