//! Command-line orchestration of the droidlens stages.
//!
//! Every subcommand reads and writes artifacts under `--out`:
//!
//! | stage        | writes                                              |
//! |--------------|-----------------------------------------------------|
//! | extract      | `reports/<app_id>.*`, `reports/index.json`          |
//! | encode       | `matrix.txt`, `matrix.labels.csv`                   |
//! | select       | `selected.txt`, `scores.txt`                        |
//! | train        | `model.json`                                        |
//! | eval         | `eval.json`, `eval.txt`                             |
//! | ensemble     | `ensembles.json`, `ensembles.txt`                   |
//! | gen-fixtures | `apks/`, `traces/`, `pcaps/`, `truth/`, `manifest.csv` |
//!
//! Each artifact has a `.meta.json` sidecar with the seed, config hash and
//! upstream fingerprints. Exit codes: 0 success, 1 some extractions failed,
//! 2 configuration, input or provenance errors.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Spec(#[from] droidlens::fixtures::SpecError),
    #[error("artifact {path}: {reason}")]
    FingerprintMismatch { path: String, reason: String },
    #[error("{0} of {1} extractions failed")]
    PartialFailure(usize, usize),
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::PartialFailure(..) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (CSV).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(
    name = "droidlens",
    version,
    about = "Android malware feature extraction and model evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse every manifest row into feature reports.
    Extract(Common),
    /// Build the feature matrix from extracted reports.
    Encode(Common),
    /// Fit the configured selection step on the whole matrix.
    Select(Common),
    /// Train one model on the (selected) matrix.
    Train(Common),
    /// Cross-validate the configured pipelines and compare them.
    Eval(Common),
    /// Rank majority-vote ensembles of evaluated pipelines.
    Ensemble(Common),
    /// Generate a synthetic corpus from a fixture spec.
    GenFixtures {
        #[command(flatten)]
        common: Common,
        /// Fixture spec file.
        #[arg(long)]
        spec: PathBuf,
    },
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
