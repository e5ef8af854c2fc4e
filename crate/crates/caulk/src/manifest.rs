//! Output directories and their `manifest.json`.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes files under a root and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    command: String,
    config_hash: String,
    started: u64,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str, config_hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            started: now(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Writes `rel` (may contain `/`) and records it. Rewriting a path replaces its entry.
    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let bytes = contents.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `manifest.json` listing every file, sorted by path.
    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            config_hash: self.config_hash.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.clone(),
            started: self.started,
            finished: now(),
            files: self.files.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Re-reads every listed file and compares digests. Returns the mismatching paths.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut bad = Vec::new();
    for f in &manifest.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}
