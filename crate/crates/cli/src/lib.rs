//! Command-line orchestration of the lithoseg pipeline and the curation API.

pub mod ablate;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod review;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use ablate::{cmd_ablate, Ablation, AblationReport, AblationRow};
pub use config::{AblationConfig, PipelineConfig, Seeds};
pub use error::{CliError, CliResult};
pub use manifest::{Run, RunManifest, Stage, StageRecord, StageStatus};
pub use pipeline::{cmd_bootstrap, cmd_eval, cmd_fine_train, cmd_refine, cmd_synth, EvalTable, Outcome};
pub use review::{cmd_review_serve, ReviewItem, ReviewState};

#[derive(Debug, Parser)]
#[command(name = "lithoseg", version, about = "Coarse-to-fine SEM segmentation pipeline")]
pub struct Cli {
    /// Run directory holding the manifest and every stage output.
    #[arg(long, global = true, default_value = "run")]
    pub run_dir: PathBuf,
    /// TOML configuration; snapshotted into the run on first use.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Derive every stage seed from this value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rerun a stage that is already done.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus.
    Synth {
        /// Corpus directory; defaults to `<run-dir>/corpus`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coarse stage: bootstrap the segmenter and predict coarse masks.
    Bootstrap {
        /// Use an existing corpus instead of `<run-dir>/corpus`.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train the displacement regressor on coarse contours.
    FineTrain,
    /// Refine the coarse masks of the test split.
    Refine,
    /// Coarse and refined metrics side by side.
    Eval,
    /// Run an ablation grid: center, angle, scan or noise.
    Ablate { which: Ablation },
    /// Serve the curation API for the iteration awaiting review.
    ReviewServe {
        /// Port on 127.0.0.1; falls back to LITHOSEG_PORT, then 8787.
        #[arg(long)]
        port: Option<u16>,
        /// Directory of the built review UI.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn port_from_env() -> CliResult<u16> {
    match std::env::var("LITHOSEG_PORT") {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::config(format!("LITHOSEG_PORT: `{v}` is not a port number"))),
        Err(_) => Ok(review::DEFAULT_PORT),
    }
}

/// Execute one parsed command line.
pub fn execute(cli: Cli) -> CliResult<Outcome> {
    let config = cli.config.as_deref().map(PipelineConfig::load).transpose()?;
    let mut run = Run::open(&cli.run_dir, config, cli.seed, cli.force)?;
    let force = cli.force;
    match cli.command {
        Command::Synth { out } => cmd_synth(&mut run, out.as_deref(), force),
        Command::Bootstrap { corpus } => cmd_bootstrap(&mut run, corpus.as_deref(), force),
        Command::FineTrain => cmd_fine_train(&mut run, force),
        Command::Refine => cmd_refine(&mut run, force),
        Command::Eval => cmd_eval(&mut run, force),
        Command::Ablate { which } => cmd_ablate(&mut run, which, force),
        Command::ReviewServe { port, ui_dir } => {
            let port = match port {
                Some(p) => p,
                None => port_from_env()?,
            };
            cmd_review_serve(&run, port, ui_dir.as_deref())?;
            Ok(Outcome::Done)
        }
    }
}
