//! Chain persistence: a columnar CSV with one column per scalar parameter
//! (random-effect columns named `mu[j]` over the union window, blank where a
//! cell was inactive) and a JSON sidecar carrying the run configuration,
//! seed, prior, window history, standardization, and software version.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so a
//! load/save cycle reproduces every parameter bit for bit. Latent `z`/`u`
//! draws are working variables of the sampler and are not persisted.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Standardization;
use crate::error::{Error, Result};
use crate::model::{ModelState, MuWindow, PriorConfig};

use super::{Chain, McmcConfig};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    version: String,
    chain_index: u32,
    n_obs: usize,
    p: usize,
    config: McmcConfig,
    prior: PriorConfig,
    window_history: Vec<(i32, i32)>,
    standardization: Standardization,
    dataset_digest: Option<String>,
}

/// Writes `<stem>.csv` and `<stem>.json` under `dir`.
pub fn save_chain(chain: &Chain, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let names = chain.parameter_names();
    let (lo, hi) = chain.union_window();

    let mut wtr = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    wtr.write_record(&names)?;
    let mut row: Vec<String> = Vec::with_capacity(names.len());
    for state in &chain.states {
        row.clear();
        for &b in &state.beta {
            row.push(b.to_string());
        }
        row.push(state.phi.to_string());
        row.push(state.sigma_mu2.to_string());
        for &b in &state.beta_omega {
            row.push(b.to_string());
        }
        row.push(state.sigma_omega.to_string());
        for j in lo..=hi {
            row.push(match state.mu.get(j) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;

    let sidecar = Sidecar {
        version: crate::VERSION.to_string(),
        chain_index: chain.chain_index,
        n_obs: chain.n_obs,
        p: chain.p(),
        config: chain.config.clone(),
        prior: chain.prior.clone(),
        window_history: chain.windows.clone(),
        standardization: chain.standardization.clone(),
        dataset_digest: chain.dataset_digest.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Loads a chain persisted by [`save_chain`]. The returned chain has empty
/// latent draws.
pub fn load_chain(dir: &Path, stem: &str) -> Result<Chain> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(
        dir.join(format!("{stem}.json")),
    )?)?;
    let p = sidecar.p;

    let mut rdr = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    let headers = rdr.headers()?.clone();
    let expected_prefix = 2 * (p + 1) + 3;
    if headers.len() < expected_prefix {
        return Err(Error::ChainFormat(format!(
            "expected at least {expected_prefix} columns, found {}",
            headers.len()
        )));
    }
    let mu_indices: Vec<i32> = headers
        .iter()
        .skip(expected_prefix)
        .map(|h| {
            h.strip_prefix("mu[")
                .and_then(|s| s.strip_suffix(']'))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::ChainFormat(format!("bad mu column `{h}`")))
        })
        .collect::<Result<_>>()?;

    let mut states = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::ChainFormat(format!("row {}: bad cell {idx}", row_no + 1)))
        };
        let mut beta = Vec::with_capacity(p + 1);
        for k in 0..=p {
            beta.push(cell(k)?);
        }
        let phi = cell(p + 1)?;
        let sigma_mu2 = cell(p + 2)?;
        let mut beta_omega = Vec::with_capacity(p + 1);
        for k in 0..=p {
            beta_omega.push(cell(p + 3 + k)?);
        }
        let sigma_omega = cell(2 * p + 4)?;

        let (w_lo, w_hi) = *sidecar.window_history.get(row_no).ok_or_else(|| {
            Error::ChainFormat(format!("window history shorter than chain ({row_no})"))
        })?;
        let mut mu_values = vec![f64::NAN; (w_hi - w_lo + 1) as usize];
        for (offset, &j) in mu_indices.iter().enumerate() {
            let raw = record.get(expected_prefix + offset).unwrap_or("");
            if j >= w_lo && j <= w_hi {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::ChainFormat(format!("row {}: bad mu[{j}] `{raw}`", row_no + 1))
                })?;
                mu_values[(j - w_lo) as usize] = v;
            } else if !raw.is_empty() {
                return Err(Error::ChainFormat(format!(
                    "row {}: mu[{j}] populated outside recorded window [{w_lo}, {w_hi}]",
                    row_no + 1
                )));
            }
        }
        if mu_values.iter().any(|v| v.is_nan()) {
            return Err(Error::ChainFormat(format!(
                "row {}: missing mu cell inside window [{w_lo}, {w_hi}]",
                row_no + 1
            )));
        }
        states.push(ModelState {
            mu: MuWindow::new(w_lo, mu_values)
                .map_err(|e| Error::ChainFormat(e.to_string()))?,
            beta,
            phi,
            sigma_mu2,
            beta_omega,
            sigma_omega,
        });
    }
    if states.len() != sidecar.window_history.len() {
        return Err(Error::ChainFormat(format!(
            "chain has {} rows but window history has {}",
            states.len(),
            sidecar.window_history.len()
        )));
    }
    Ok(Chain {
        states,
        latents: Vec::new(),
        windows: sidecar.window_history,
        config: sidecar.config,
        prior: sidecar.prior,
        standardization: sidecar.standardization,
        n_obs: sidecar.n_obs,
        chain_index: sidecar.chain_index,
        dataset_digest: sidecar.dataset_digest,
    })
}
