//! Artifact collection, atomic writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactDigest {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub trials: u64,
    /// Hash of the fully resolved parameters.
    pub parameters_sha256: String,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<ArtifactDigest>,
}

/// Files produced by one scenario, kept in memory until the run succeeds.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<InputDigest>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.add(name, to_json(value)?);
        Ok(())
    }

    pub fn add_text(&mut self, name: &str, text: String) {
        self.add(name, text.into_bytes());
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes every artifact and `manifest.json` into `dir`.
pub fn commit(
    dir: &Path,
    scenario: &str,
    seed: u64,
    trials: u64,
    parameters: &[u8],
    artifacts: Artifacts,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut digests = Vec::with_capacity(artifacts.files.len());
    for (name, bytes) in &artifacts.files {
        write_atomic(&dir.join(name), bytes)?;
        digests.push(ArtifactDigest { name: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
    }
    digests.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest {
        tool: "qmem",
        version: env!("CARGO_PKG_VERSION"),
        scenario: scenario.to_string(),
        seed,
        trials,
        parameters_sha256: sha256_hex(parameters),
        inputs: artifacts.inputs,
        artifacts: digests,
    };
    let path = dir.join("manifest.json");
    write_atomic(&path, &to_json(&manifest)?)?;
    Ok(path)
}
