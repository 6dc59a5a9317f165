//! Command-line pipeline: synthetic corpus or external CSVs in, similarity
//! scores, feature table, model fits, comparison report and figures out.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use manifest::{StageManifest, Workdir};
pub use stages::{run_pipeline, run_stage, Stage, StageOutcome};

#[derive(Debug, Parser)]
#[command(name = "citesim", version, about = "Citation similarity and additive-model pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Work directory for all artifacts.
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Abort ingestion on the first invalid row.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Keep citations whose receiver was granted after the sender.
    #[arg(long, global = true)]
    pub keep_negative_lags: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate patents and citations into the work directory.
    Ingest,
    /// Score every citation by embedding cosine similarity.
    Score,
    /// Build the per-citation feature table.
    Features,
    /// Fit one of the nested models.
    Fit {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
        model: u8,
    },
    /// Compare fitted models side by side.
    Report,
    /// Emit figure tables and SVG charts.
    Figs,
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        patents: Option<usize>,
        #[arg(long)]
        edges: Option<usize>,
    },
}

impl Cli {
    /// Resolves the configuration: defaults, then the config file, then flags.
    pub fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.global.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(w) = &self.global.workdir {
            cfg.workdir = w.clone();
        }
        if let Some(s) = self.global.seed {
            cfg.seed = s;
        }
        cfg.strict |= self.global.strict;
        cfg.keep_negative_lags |= self.global.keep_negative_lags;
        if let Command::Synth { patents, edges } = &self.command {
            cfg.synth_patents = patents.unwrap_or(cfg.synth_patents);
            cfg.synth_edges = edges.unwrap_or(cfg.synth_edges);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stage(&self) -> Stage {
        match self.command {
            Command::Ingest => Stage::Ingest,
            Command::Score => Stage::Score,
            Command::Features => Stage::Features,
            Command::Fit { model } => Stage::Fit(model),
            Command::Report => Stage::Report,
            Command::Figs => Stage::Figs,
            Command::Synth { .. } => Stage::Synth,
        }
    }

    pub fn run(&self) -> Result<StageOutcome> {
        run_stage(self.stage(), &self.config()?)
    }
}
