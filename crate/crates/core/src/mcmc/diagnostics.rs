//! Monte Carlo error quantification and chain summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

use super::Chain;

/// Batch-means 95% Monte Carlo confidence interval for the mean of a series.
///
/// Splits the series into `batch_count` equal batches (a remainder at the
/// end is dropped) and returns `(mean, half_width)` with
/// `half_width = t(0.975, b - 1) * sd(batch means) / sqrt(b)`.
pub fn batch_means_ci(series: &[f64], batch_count: usize) -> Result<(f64, f64)> {
    if batch_count < 2 {
        return Err(Error::Domain("batch_count must be at least 2".into()));
    }
    if series.len() < 2 * batch_count {
        return Err(Error::Domain(format!(
            "series of length {} is shorter than 2 batches of {batch_count}",
            series.len()
        )));
    }
    let batch_len = series.len() / batch_count;
    let used = batch_len * batch_count;
    let means: Vec<f64> = (0..batch_count)
        .map(|b| stats::mean(&series[b * batch_len..(b + 1) * batch_len]))
        .collect();
    let grand = stats::mean(&series[..used]);
    let sd = stats::sample_sd(&means);
    let t = stats::student_t_quantile(0.975, (batch_count - 1) as f64);
    Ok((grand, t * sd / (batch_count as f64).sqrt()))
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// Batch-means 95% Monte Carlo half-width; absent when the parameter was
    /// not active in every retained draw or the series is too short.
    pub mc_half_width: Option<f64>,
    /// Number of retained draws in which the parameter was active.
    pub active_draws: usize,
    /// Down-sampled trace for quick mixing checks.
    pub trace: Vec<f64>,
}

/// Posterior summaries for every scalar parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub parameters: Vec<ParameterSummary>,
    pub retained: usize,
    pub chains: usize,
    /// Split potential scale reduction per parameter, present with two or
    /// more chains.
    pub rhat: Vec<(String, f64)>,
}

const TRACE_POINTS: usize = 128;

fn thumbnail(series: &[f64]) -> Vec<f64> {
    if series.len() <= TRACE_POINTS {
        return series.to_vec();
    }
    let step = series.len() as f64 / TRACE_POINTS as f64;
    (0..TRACE_POINTS)
        .map(|k| series[(k as f64 * step) as usize])
        .collect()
}

/// Merges retained draws across chains (in chain order) and summarizes every
/// parameter: posterior mean, SD, central 95% interval, batch-means Monte
/// Carlo half-widths, and trace thumbnails.
pub fn summarize(chains: &[Chain], batch_count: usize) -> Result<ChainSummary> {
    if chains.is_empty() || chains.iter().any(|c| c.is_empty()) {
        return Err(Error::Empty);
    }
    let names = chains[0].parameter_names();
    let retained: usize = chains.iter().map(|c| c.len()).sum();
    let mut parameters = Vec::with_capacity(names.len());
    let mut rhat = Vec::new();

    // union mu window across chains may be wider than chain 0's
    let mut all_names = names;
    let (mut lo, mut hi) = (0i32, 0i32);
    for c in chains {
        let (a, b) = c.union_window();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    all_names.retain(|n| !n.starts_with("mu["));
    for j in lo..=hi {
        all_names.push(format!("mu[{j}]"));
    }

    for name in &all_names {
        let mut merged: Vec<f64> = Vec::with_capacity(retained);
        let mut per_chain: Vec<Vec<f64>> = Vec::with_capacity(chains.len());
        let mut fully_active = true;
        for chain in chains {
            let series = chain
                .series(name)
                .ok_or_else(|| Error::ChainFormat(format!("unknown parameter `{name}`")))?;
            let flat: Vec<f64> = series.iter().filter_map(|v| *v).collect();
            if flat.len() != series.len() {
                fully_active = false;
            }
            merged.extend_from_slice(&flat);
            per_chain.push(flat);
        }
        if merged.is_empty() {
            continue;
        }
        let mc_half_width = if fully_active {
            batch_means_ci(&merged, batch_count).ok().map(|(_, hw)| hw)
        } else {
            None
        };
        let mut sorted = merged.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        parameters.push(ParameterSummary {
            name: name.clone(),
            mean: stats::mean(&merged),
            sd: stats::sample_sd(&merged),
            q025: stats::quantile_sorted(&sorted, 0.025),
            q975: stats::quantile_sorted(&sorted, 0.975),
            mc_half_width,
            active_draws: merged.len(),
            trace: thumbnail(&per_chain[0]),
        });
        if chains.len() >= 2 && fully_active {
            rhat.push((name.clone(), potential_scale_reduction(&per_chain)));
        }
    }
    Ok(ChainSummary {
        parameters,
        retained,
        chains: chains.len(),
        rhat,
    })
}

/// Split potential scale reduction across chains (each chain is halved, so a
/// single long chain can also be screened).
pub fn potential_scale_reduction(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let mid = c.len() / 2;
        halves.push(&c[..mid]);
        halves.push(&c[mid..]);
    }
    let n = halves.iter().map(|h| h.len()).min().unwrap_or(0) as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let means: Vec<f64> = halves.iter().map(|h| stats::mean(h)).collect();
    let vars: Vec<f64> = halves.iter().map(|h| stats::sample_variance(h)).collect();
    let w = stats::mean(&vars);
    let b = n * stats::sample_variance(&means);
    if w == 0.0 {
        return 1.0;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_series_has_zero_half_width() {
        let series = vec![3.5; 1000];
        let (mean, hw) = batch_means_ci(&series, 50).unwrap();
        assert_eq!(mean, 3.5);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn iid_normal_half_width_matches_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let series: Vec<f64> = (0..1_000_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, hw) = batch_means_ci(&series, 50).unwrap();
        let theory = 1.96 / 1000.0;
        assert!(
            (hw - theory).abs() / theory < 0.2,
            "half-width {hw} vs {theory}"
        );
    }

    #[test]
    fn autocorrelated_series_widens_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let n = 200_000;
        let rho: f64 = 0.99;
        let innovation_sd = (1.0 - rho * rho).sqrt();
        let mut x = 0.0;
        let mut ar = Vec::with_capacity(n);
        let mut iid = Vec::with_capacity(n);
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            x = rho * x + innovation_sd * e;
            ar.push(x);
            iid.push(rng.sample::<f64, _>(StandardNormal));
        }
        let (_, hw_ar) = batch_means_ci(&ar, 50).unwrap();
        let (_, hw_iid) = batch_means_ci(&iid, 50).unwrap();
        assert!(hw_ar > 3.0 * hw_iid, "ar {hw_ar} vs iid {hw_iid}");
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(batch_means_ci(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(batch_means_ci(&vec![0.0; 10], 50).is_err());
    }

    #[test]
    fn rhat_near_one_for_identical_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = potential_scale_reduction(&[a.clone(), b]);
        assert!((r - 1.0).abs() < 0.05, "{r}");
        // diverged chains blow up
        let shifted: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        let r = potential_scale_reduction(&[a, shifted]);
        assert!(r > 2.0, "{r}");
    }
}
