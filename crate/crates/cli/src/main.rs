//! `softrank`: datasets, training, sampling and evaluation for soft-rank
//! permutation diffusion.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a validation check failed.

mod commands;
mod config;
mod records;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Command, Options};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "softrank",
    version,
    about = "Permutation diffusion over continuous soft ranks",
    long_about = "Generates sorting and TSP datasets, trains ranking denoisers, runs the reverse \
                  sampler and reports metrics. Every output is JSON lines with a header record \
                  that echoes the effective configuration.\n\n\
                  Settings come from flags, then --config (TOML, same keys as the flags with \
                  underscores), then built-in defaults. --seed is required.\n\n\
                  Exit codes: 0 success, 1 usage or configuration error, 2 validation failure.",
    after_help = "See docs/cli.md for the file formats and a worked example."
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML file with default settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    options: Options,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Generate a dataset into <out>/dataset.jsonl (or --dataset)
    GenData,
    /// Train a denoiser; writes <out>/model.ckpt and <out>/loss.jsonl
    Train,
    /// Run the reverse sampler on every dataset instance; writes <out>/samples.jsonl
    Sample,
    /// Score samples against the dataset labels; writes <out>/metrics.jsonl
    Eval,
    /// Check bridge-kernel identities and Monte-Carlo moments; exits 2 on failure
    ValidateKernels,
    /// Train and score the forward-process / parametrization / model grid on sorting
    Ablate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::GenData => Command::GenData,
            Sub::Train => Command::Train,
            Sub::Sample => Command::Sample,
            Sub::Eval => Command::Eval,
            Sub::ValidateKernels => Command::ValidateKernels,
            Sub::Ablate => Command::Ablate,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = Command::from(cli.command);
    let resolved = cli
        .config
        .as_deref()
        .map(Options::from_toml_file)
        .transpose()
        .and_then(|file| config::resolve(command, cli.options.or(file.unwrap_or_default())));
    let resolved = match resolved {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(threads) = resolved.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(resolved) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed(msg)) => {
            eprintln!("{} failed: {msg}", command.name());
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
