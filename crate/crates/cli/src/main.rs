mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ringpiv", version, about = "Binary-correlation PIV and ring architecture simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Simulator configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for `synth`. Defaults to stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Progress and diagnostics on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic particle image pair with ground truth.
    Synth(commands::SynthArgs),
    /// Compute the vector field of an image pair.
    Piv(commands::PivArgs),
    /// Throughput versus processing-module count.
    Scale(commands::ScaleArgs),
    /// Fit correlation and ring-overhead cycle costs to measured rates.
    Calibrate(commands::CalibrateArgs),
}

/// Failure with the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<ringpiv::Error> for CliError {
    fn from(e: ringpiv::Error) -> Self {
        use ringpiv::Error::*;
        let code = match e {
            Input(_) | SizeMismatch { .. } | NotTileable { .. } => EXIT_INPUT,
            Config(_) | InsufficientData { .. } => EXIT_CONFIG,
            Deadlock { .. } | Io(_) => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(&cli.common, a),
        Command::Piv(a) => commands::piv(&cli.common, a),
        Command::Scale(a) => commands::scale(&cli.common, a),
        Command::Calibrate(a) => commands::calibrate(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ringpiv: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
