mod compute_es;
mod diagnose;
mod fit;
mod fit_score;
mod predict;
mod profile;
mod sbc;

pub use compute_es::run_compute_es;
pub use diagnose::run_diagnose;
pub use fit::run_fit;
pub use fit_score::run_fit_score;
pub use predict::run_predict;
pub use profile::run_profile;
pub use sbc::run_sbc;

use std::fs;
use std::path::{Path, PathBuf};

use h2meta_core::mcmc::{load_chain, Chain};

use crate::error::{CliError, CliResult, INPUT_ERROR};

pub(crate) fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::new(INPUT_ERROR, format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn parse_kv_pairs(pairs: &[String]) -> CliResult<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|raw| {
            raw.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| {
                    CliError::new(INPUT_ERROR, format!("expected key=value, got `{raw}`"))
                })
        })
        .collect()
}

pub(crate) fn load_chain_checked(dir: &Path, stem: &str) -> CliResult<Chain> {
    let chain = load_chain(dir, stem)?;
    if chain.is_empty() {
        return Err(CliError::new(
            INPUT_ERROR,
            format!("chain {stem} in {} holds no draws", dir.display()),
        ));
    }
    Ok(chain)
}

/// All chain stems (`chain_*.csv` with a matching sidecar) in a directory,
/// sorted by chain index.
pub(crate) fn chain_stems(dir: &Path) -> CliResult<Vec<String>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir)
        .map_err(|e| CliError::new(INPUT_ERROR, format!("cannot read {}: {e}", dir.display())))?
    {
        let path: PathBuf = entry?.path();
        if let (Some(stem), Some("csv")) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) {
            if stem.starts_with("chain_") && dir.join(format!("{stem}.json")).exists() {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        return Err(CliError::new(
            INPUT_ERROR,
            format!("no chain files in {}", dir.display()),
        ));
    }
    Ok(stems)
}
