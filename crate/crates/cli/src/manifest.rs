//! Work directory layout, stage manifests and the run lock.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use citesim_core::{file_digest, write_atomic};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const LOCK_FILE: &str = ".citesim.lock";
pub const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the work directory for pipeline artifacts.
    pub path: String,
    pub sha256: String,
}

/// What a stage read and wrote. Timings live in a separate file so that
/// manifests are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub settings: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub report: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Internal(format!("cannot create workdir {}: {e}", root.display())))?;
        Ok(Workdir {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Creates the parent directories of `rel` and returns its full path.
    pub fn output(&self, rel: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    /// Workdir-relative name when `path` is inside the workdir.
    pub fn display(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(rel) => rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            Err(_) => path.display().to_string(),
        }
    }

    pub fn entry(&self, path: &Path) -> Result<FileEntry> {
        Ok(FileEntry {
            path: self.display(path),
            sha256: file_digest(path)?,
        })
    }

    pub fn manifest_path(&self, stage: &str) -> PathBuf {
        self.path(&format!("{MANIFEST_DIR}/{stage}.json"))
    }

    pub fn read_manifest(&self, stage: &str) -> Result<Option<StageManifest>> {
        let path = self.manifest_path(stage);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    pub fn write_manifest(&self, manifest: &StageManifest) -> Result<PathBuf> {
        let path = self.output(&format!("{MANIFEST_DIR}/{}.json", manifest.stage))?;
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn write_timing(&self, stage: &str, seconds: f64) -> Result<()> {
        let path = self.output(&format!("{MANIFEST_DIR}/{stage}.timing.json"))?;
        let text = serde_json::to_string_pretty(&serde_json::json!({ "stage": stage, "seconds": seconds }))?;
        write_atomic(&path, text.as_bytes())?;
        Ok(())
    }

    /// Checks that `rel` exists and still has the digest recorded by the
    /// stage that produced it.
    pub fn require(&self, rel: &str, stage: &str) -> Result<FileEntry> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(CliError::missing_stage(rel, stage));
        }
        let manifest = self
            .read_manifest(stage)?
            .ok_or_else(|| CliError::missing_stage(&format!("manifest for {rel}"), stage))?;
        let recorded = manifest
            .outputs
            .iter()
            .find(|e| e.path == rel)
            .ok_or_else(|| CliError::Validation(format!("{rel} is not recorded by `{stage}`; rerun `{stage}`")))?;
        let entry = self.entry(&path)?;
        if entry.sha256 != recorded.sha256 {
            return Err(CliError::Validation(format!(
                "{rel} changed since `{stage}` ran; rerun `{stage}`"
            )));
        }
        Ok(entry)
    }

    pub fn lock(&self) -> Result<WorkdirLock> {
        let path = self.path(LOCK_FILE);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Validation(format!(
                    "{} is in use by another run (remove {} if it is stale)",
                    self.root.display(),
                    path.display()
                ))
            } else {
                CliError::Internal(format!("cannot create {}: {e}", path.display()))
            }
        })?;
        writeln!(file, "{}", std::process::id())?;
        Ok(WorkdirLock { path })
    }
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
