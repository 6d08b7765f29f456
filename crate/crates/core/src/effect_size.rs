//! Heritability effect sizes from twin correlations.
//!
//! A study reporting an MZ correlation `rho_mz` over `n_mz` pairs and a DZ
//! correlation `rho_dz` over `n_dz` pairs yields the heritability estimate
//! `h2 = 2 (rho_mz - rho_dz)` with sampling variance
//! `4 [(1 - rho_mz^2)^2 / n_mz + (1 - rho_dz^2)^2 / n_dz]`.
//! Estimates from several informants within one study are combined by an
//! inverse-variance weighted average.
//!
//! `h2` is deliberately not clamped to [0, 1]: clamping would bias pooling
//! and the downstream regression accepts any real response.

use std::collections::BTreeSet;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pearson_correlation;

/// Sample correlations of MZ and DZ twin pairs on one construct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinCorrelations {
    pub rho_mz: f64,
    pub rho_dz: f64,
    pub n_mz: u64,
    pub n_dz: u64,
}

impl TwinCorrelations {
    /// Validates that both correlations are finite and in [-1, 1] and both
    /// pair counts are at least 2.
    pub fn new(rho_mz: f64, rho_dz: f64, n_mz: u64, n_dz: u64) -> Result<Self> {
        for (name, rho) in [("rho_mz", rho_mz), ("rho_dz", rho_dz)] {
            if !rho.is_finite() || rho.abs() > 1.0 {
                return Err(Error::Domain(format!(
                    "{name} = {rho} is not a correlation in [-1, 1]"
                )));
            }
        }
        for (name, n) in [("n_mz", n_mz), ("n_dz", n_dz)] {
            if n < 2 {
                return Err(Error::Domain(format!("{name} = {n} must be at least 2")));
            }
        }
        Ok(Self {
            rho_mz,
            rho_dz,
            n_mz,
            n_dz,
        })
    }
}

/// A heritability effect size with its sampling variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeritabilityEstimate {
    /// Variance proportion; may fall outside [0, 1].
    pub h2: f64,
    /// Sampling variance of `h2`.
    pub var: f64,
    /// True when the value is an inverse-variance average over informants.
    pub pooled: bool,
}

/// Heritability point estimate `2 (rho_mz - rho_dz)`.
pub fn falconer_h2(c: &TwinCorrelations) -> f64 {
    2.0 * (c.rho_mz - c.rho_dz)
}

/// Sampling variance of [`falconer_h2`]:
/// `4 [(1 - rho_mz^2)^2 / n_mz + (1 - rho_dz^2)^2 / n_dz]`.
pub fn falconer_variance(c: &TwinCorrelations) -> f64 {
    let a = 1.0 - c.rho_mz * c.rho_mz;
    let b = 1.0 - c.rho_dz * c.rho_dz;
    4.0 * (a * a / c.n_mz as f64 + b * b / c.n_dz as f64)
}

/// Builds a [`HeritabilityEstimate`] from one set of twin correlations.
pub fn estimate_from_correlations(c: &TwinCorrelations) -> HeritabilityEstimate {
    HeritabilityEstimate {
        h2: falconer_h2(c),
        var: falconer_variance(c),
        pooled: false,
    }
}

/// Inverse-variance weighted average of several estimates from one study.
///
/// Returns `h2 = sum(h2_i / var_i) / sum(1 / var_i)` with pooled variance
/// `1 / sum(1 / var_i)` and `pooled = true`. Errors on an empty list or any
/// zero variance (the weight is undefined).
pub fn pool_within_study(estimates: &[HeritabilityEstimate]) -> Result<HeritabilityEstimate> {
    if estimates.is_empty() {
        return Err(Error::Empty);
    }
    let mut weight_sum = 0.0;
    let mut weighted = 0.0;
    for (i, e) in estimates.iter().enumerate() {
        if !(e.var > 0.0) || !e.var.is_finite() {
            return Err(Error::Domain(format!(
                "estimate {i}: var = {} must be positive and finite",
                e.var
            )));
        }
        let w = 1.0 / e.var;
        weight_sum += w;
        weighted += w * e.h2;
    }
    Ok(HeritabilityEstimate {
        h2: weighted / weight_sum,
        var: 1.0 / weight_sum,
        pooled: true,
    })
}

/// Simulates one twin study under an additive-genetic / shared-environment
/// decomposition and returns the sample correlations.
///
/// MZ pairs have true correlation `a2 + c2`, DZ pairs `a2 / 2 + c2`; trait
/// pairs are drawn from a bivariate standard normal. Deterministic given
/// `seed`. Zero-variance draws (a probability-zero event) are rejected and
/// resampled with a note on stderr.
pub fn simulate_twin_sample(
    a2: f64,
    c2: f64,
    n_mz: u64,
    n_dz: u64,
    seed: u64,
) -> Result<TwinCorrelations> {
    if !(a2 >= 0.0 && c2 >= 0.0 && a2 + c2 <= 1.0) {
        return Err(Error::Domain(format!(
            "variance components (a2 = {a2}, c2 = {c2}) must be nonnegative with a2 + c2 <= 1"
        )));
    }
    if n_mz < 2 || n_dz < 2 {
        return Err(Error::Domain(
            "need at least 2 pairs per zygosity group".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho_mz = sample_correlated_pairs(&mut rng, a2 + c2, n_mz);
    let rho_dz = sample_correlated_pairs(&mut rng, a2 / 2.0 + c2, n_dz);
    TwinCorrelations::new(rho_mz, rho_dz, n_mz, n_dz)
}

fn sample_correlated_pairs<R: Rng>(rng: &mut R, rho: f64, n: u64) -> f64 {
    let load = (1.0 - rho * rho).sqrt();
    loop {
        let mut first = Vec::with_capacity(n as usize);
        let mut second = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            first.push(z1);
            second.push(rho * z1 + load * z2);
        }
        match pearson_correlation(&first, &second) {
            Some(r) => return r,
            None => eprintln!("degenerate zero-variance twin sample rejected; resampling"),
        }
    }
}

/// One per-informant correlation row of the input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub study_id: String,
    pub informant: String,
    pub correlations: TwinCorrelations,
}

/// One effect-size row of the output CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSizeRow {
    pub study_id: String,
    pub estimate: HeritabilityEstimate,
}

const CORRELATION_COLUMNS: [&str; 6] = ["study_id", "informant", "rho_mz", "rho_dz", "n_mz", "n_dz"];

/// Reads per-informant correlation rows. The header must contain exactly the
/// columns `study_id, informant, rho_mz, rho_dz, n_mz, n_dz`; invalid cells
/// produce per-row diagnostics naming the row and column.
pub fn read_correlations_csv<R: io::Read>(reader: R) -> Result<Vec<CorrelationRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = Vec::with_capacity(CORRELATION_COLUMNS.len());
    for name in CORRELATION_COLUMNS {
        match headers.iter().position(|h| h == name) {
            Some(i) => index.push(i),
            None => return Err(Error::Header(format!("missing column `{name}`"))),
        }
    }
    let mut rows = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let row = row_no + 1;
        let record = record?;
        let field = |slot: usize| record.get(index[slot]).unwrap_or("").trim();
        let parse_f64 = |slot: usize| -> Result<f64> {
            field(slot).parse::<f64>().map_err(|_| Error::Row {
                row,
                column: CORRELATION_COLUMNS[slot].into(),
                reason: format!("`{}` is not a number", field(slot)),
            })
        };
        let parse_u64 = |slot: usize| -> Result<u64> {
            field(slot).parse::<u64>().map_err(|_| Error::Row {
                row,
                column: CORRELATION_COLUMNS[slot].into(),
                reason: format!("`{}` is not a positive integer", field(slot)),
            })
        };
        let rho_mz = parse_f64(2)?;
        let rho_dz = parse_f64(3)?;
        let n_mz = parse_u64(4)?;
        let n_dz = parse_u64(5)?;
        let correlations =
            TwinCorrelations::new(rho_mz, rho_dz, n_mz, n_dz).map_err(|e| match e {
                Error::Domain(reason) => {
                    let column = if reason.starts_with("rho_mz") {
                        "rho_mz"
                    } else if reason.starts_with("rho_dz") {
                        "rho_dz"
                    } else if reason.starts_with("n_mz") {
                        "n_mz"
                    } else {
                        "n_dz"
                    };
                    Error::Row {
                        row,
                        column: column.into(),
                        reason,
                    }
                }
                other => other,
            })?;
        rows.push(CorrelationRow {
            study_id: field(0).to_string(),
            informant: field(1).to_string(),
            correlations,
        });
    }
    Ok(rows)
}

/// Converts correlation rows to effect sizes. With `pool = false` each input
/// row yields one output row; with `pool = true` rows sharing a `study_id`
/// are combined by [`pool_within_study`], preserving first-appearance order.
pub fn compute_effect_sizes(rows: &[CorrelationRow], pool: bool) -> Result<Vec<EffectSizeRow>> {
    if !pool {
        return Ok(rows
            .iter()
            .map(|r| EffectSizeRow {
                study_id: r.study_id.clone(),
                estimate: estimate_from_correlations(&r.correlations),
            })
            .collect());
    }
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    for r in rows {
        if seen.insert(r.study_id.clone()) {
            order.push(r.study_id.clone());
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let estimates: Vec<HeritabilityEstimate> = rows
            .iter()
            .filter(|r| r.study_id == id)
            .map(|r| estimate_from_correlations(&r.correlations))
            .collect();
        out.push(EffectSizeRow {
            study_id: id,
            estimate: pool_within_study(&estimates)?,
        });
    }
    Ok(out)
}

/// Writes `(study_id, h2, var, pooled)` rows.
pub fn write_effect_sizes_csv<W: io::Write>(writer: W, rows: &[EffectSizeRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["study_id", "h2", "var", "pooled"])?;
    for r in rows {
        wtr.write_record([
            r.study_id.as_str(),
            &r.estimate.h2.to_string(),
            &r.estimate.var.to_string(),
            &r.estimate.pooled.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
