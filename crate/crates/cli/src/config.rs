//! Pipeline configuration: a flat `key = value` file, overridden by
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    /// External patent/citation CSVs; the synthetic corpus is used when unset.
    pub patents: Option<PathBuf>,
    pub citations: Option<PathBuf>,
    /// External PSIM file; mock embeddings are generated when unset.
    pub psim: Option<PathBuf>,
    pub strict: bool,
    pub keep_negative_lags: bool,
    pub utility_only: bool,
    pub seed: u64,
    pub dim: usize,
    pub chunk_size: usize,
    /// Scoring threads; 0 lets the runtime decide.
    pub workers: usize,
    pub basis_size: usize,
    pub penalty_order: usize,
    pub log_lambda_min: f64,
    pub log_lambda_max: f64,
    pub grid_size: usize,
    pub synth_patents: usize,
    pub synth_edges: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workdir: PathBuf::from("work"),
            patents: None,
            citations: None,
            psim: None,
            strict: false,
            keep_negative_lags: false,
            utility_only: true,
            seed: 7,
            dim: 384,
            chunk_size: 4096,
            workers: 0,
            basis_size: 20,
            penalty_order: 2,
            log_lambda_min: -8.0,
            log_lambda_max: 12.0,
            grid_size: 200,
            synth_patents: 5_000,
            synth_edges: 50_000,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Validation(format!("config: invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Validation(format!("config: invalid value `{value}` for `{key}`"))),
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(CliError::Validation(format!("config line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value, base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || base.join(value);
        match key {
            "workdir" => self.workdir = path(),
            "patents" => self.patents = Some(path()),
            "citations" => self.citations = Some(path()),
            "psim" => self.psim = Some(path()),
            "strict" => self.strict = parse_bool(key, value)?,
            "keep_negative_lags" => self.keep_negative_lags = parse_bool(key, value)?,
            "utility_only" => self.utility_only = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "chunk_size" => self.chunk_size = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "basis_size" => self.basis_size = parse(key, value)?,
            "penalty_order" => self.penalty_order = parse(key, value)?,
            "log_lambda_min" => self.log_lambda_min = parse(key, value)?,
            "log_lambda_max" => self.log_lambda_max = parse(key, value)?,
            "grid_size" => self.grid_size = parse(key, value)?,
            "synth_patents" => self.synth_patents = parse(key, value)?,
            "synth_edges" => self.synth_edges = parse(key, value)?,
            _ => return Err(CliError::Validation(format!("config: unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Validation(format!("config: {m}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be positive");
        }
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2");
        }
        if !(self.log_lambda_min < self.log_lambda_max) {
            return bad("log_lambda_min must be below log_lambda_max");
        }
        if self.patents.is_some() != self.citations.is_some() {
            return bad("patents and citations must be set together");
        }
        Ok(())
    }
}
