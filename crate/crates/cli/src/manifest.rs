//! Run manifests and checksummed output emission.

use std::fs;
use std::path::{Path, PathBuf};

use ham_core::output::atomic_write;
use ham_core::spectral::CacheStats;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Resolved configuration in config-file syntax.
    pub config: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub threads: usize,
    pub outputs: Vec<OutputEntry>,
    pub cache: CacheStats,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Integrity(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Integrity(format!("malformed manifest {}: {e}", path.display())))
    }

    /// Recomputes every output checksum; returns the mismatches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            match fs::read(dir.join(&o.path)) {
                Ok(bytes) if sha256_hex(&bytes) == o.sha256 => {}
                Ok(_) => bad.push(format!("{}: checksum mismatch", o.path)),
                Err(e) => bad.push(format!("{}: {e}", o.path)),
            }
        }
        bad
    }

    pub fn output(&self, name: &str) -> Option<&OutputEntry> {
        self.outputs.iter().find(|o| o.path == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes outputs atomically into one directory and records their checksums.
pub struct Emitter {
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl Emitter {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Emitter { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        atomic_write(&self.dir.join(name), bytes).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, text.as_bytes())
    }

    pub fn into_outputs(self) -> Vec<OutputEntry> {
        self.outputs
    }
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    atomic_write(&dir.join(MANIFEST_NAME), text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string()))
}
