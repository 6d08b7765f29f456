//! Run manifests: every command records its input digests, effective
//! configuration, seed, and software version. A rerun into the same output
//! directory verifies that the recorded input digests still match.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, INPUT_ERROR, MISMATCH_ERROR};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    /// Echo of the effective configuration, including the seed when one
    /// applies.
    pub params: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| {
        CliError::new(INPUT_ERROR, format!("cannot read {}: {e}", path.display()))
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(to_hex(&hasher.finalize()))
}

fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn digest_inputs(paths: &[&Path]) -> Result<Vec<InputDigest>, CliError> {
    paths
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("manifest.json")
}

/// Checks freshly computed input digests against a manifest already present
/// in `out_dir` for the same command. Runs before any output is written so
/// a rejected rerun leaves the directory untouched.
pub fn verify_against_previous(
    out_dir: &Path,
    command: &str,
    inputs: &[InputDigest],
) -> Result<(), CliError> {
    let path = manifest_path(out_dir);
    let Ok(text) = fs::read_to_string(&path) else {
        return Ok(());
    };
    let Ok(previous) = serde_json::from_str::<Manifest>(&text) else {
        return Ok(());
    };
    if previous.command != command {
        return Ok(());
    }
    for prev in &previous.inputs {
        if let Some(cur) = inputs.iter().find(|c| c.path == prev.path) {
            if cur.sha256 != prev.sha256 {
                return Err(CliError::new(
                    MISMATCH_ERROR,
                    format!(
                        "input `{}` changed since the recorded run (manifest {})",
                        prev.path,
                        path.display()
                    ),
                ));
            }
        }
    }
    Ok(())
}

pub fn write_manifest(out_dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::new(INPUT_ERROR, format!("manifest serialization: {e}")))?;
    fs::write(manifest_path(out_dir), json)
        .map_err(|e| CliError::new(INPUT_ERROR, format!("cannot write manifest: {e}")))?;
    Ok(())
}
