mod commands;
mod config;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cosparse::Error;

#[derive(Parser, Debug)]
#[command(name = "cosparse", version, about = "Coupled co-sparse analysis for bimodal images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration with a `version` key and one table per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn an operator pair from image pairs or synthetic scenes.
    Learn(commands::LearnArgs),
    /// Super-resolve a depth or second-modality image guided by the first modality.
    Reconstruct(commands::ReconstructArgs),
    /// Estimate the transform aligning a moving image to a fixed one.
    Register(commands::RegisterArgs),
    /// Render a synthetic scene pair.
    Synth(commands::SynthArgs),
    /// Report RMSE and bad-pixel rates or registration residuals.
    Evaluate(commands::EvaluateArgs),
    /// Run the built-in consistency checks.
    Selftest(selftest::SelftestArgs),
    /// Print the effective configuration as TOML.
    Config(commands::ConfigArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(Error),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Library(e) => match e {
                Error::ZeroDenominator(_)
                | Error::LineSearchFailure { .. }
                | Error::RankDeficient(_)
                | Error::CoincidentRows(..)
                | Error::NonFiniteObjective(_)
                | Error::NonFiniteGradient
                | Error::DegenerateColumn { .. } => 4,
                _ => 3,
            },
            CliError::Failed(_) => 4,
        }
    }

    fn class(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage error",
            3 => "validation error",
            _ => "numerical failure",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Learn(a) => commands::learn(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Register(a) => commands::register(a),
        Command::Synth(a) => commands::synth(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Selftest(a) => selftest::run(a),
        Command::Config(a) => commands::show_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cosparse: {}: {e}", e.class());
            ExitCode::from(e.exit_code())
        }
    }
}
