//! Atomic file output and run manifests.

use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Resolved, SeedSource};

/// Files a run produced, held in memory until the run is complete.
#[derive(Debug, Default)]
pub struct Products {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    /// Per-task failures that were skipped rather than fatal.
    pub failures: Vec<String>,
}

impl Products {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn add_json(&mut self, path: PathBuf, value: &impl Serialize) {
        self.add(path, json_bytes(value));
    }
}

pub fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output types serialize");
    out.push(b'\n');
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Write through a temporary file in the target directory and rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Outputs were written but some tasks failed.
    Partial,
    /// The computation aborted; no result files were written.
    Failed,
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub verb: &'static str,
    pub status: Status,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub config_file: Option<PathBuf>,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_sha256: String,
    pub config: Value,
    pub workers: Option<usize>,
    pub outputs: Vec<OutputRecord>,
    pub failures: Vec<String>,
    pub error: Option<String>,
}

impl Manifest {
    pub fn new<P>(verb: &'static str, resolved: &Resolved<P>, workers: Option<usize>) -> Self {
        let compact = serde_json::to_vec(&resolved.config).expect("JSON value serializes");
        Self {
            tool: "netctl",
            version: env!("CARGO_PKG_VERSION"),
            verb,
            status: Status::Ok,
            seed: resolved.seed,
            seed_source: resolved.seed_source,
            config_file: resolved.config_file.clone(),
            config_sha256: sha256_hex(&compact),
            config: resolved.config.clone(),
            workers,
            outputs: Vec::new(),
            failures: Vec::new(),
            error: None,
        }
    }
}
