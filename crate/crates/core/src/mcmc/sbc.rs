//! Simulation-based calibration of the sampler.
//!
//! Each replication draws parameters from the prior, simulates a dataset
//! from the model, fits it with the same prior, and ranks the true parameter
//! among the retained posterior draws. A correct sampler produces uniform
//! ranks; per-parameter chi-square tests flag departures. The harness is its
//! own oracle: a deliberately broken update (see
//! [`McmcConfig::skip_updates`](super::McmcConfig)) must produce non-uniform
//! ranks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, EffectSizeRecord, ModeratorSchema};
use crate::error::{Error, Result};
use crate::model::PriorConfig;
use crate::stats;

use super::{run_chain, McmcConfig};

/// Shape of the reduced model used for calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcSetup {
    pub n_obs: usize,
    pub n_moderators: usize,
    /// Observation sampling variances are drawn log-uniformly in this range.
    pub var_range: (f64, f64),
    /// Rank histogram bins; must divide the number of rank levels.
    pub bins: usize,
}

impl Default for SbcSetup {
    fn default() -> Self {
        Self {
            n_obs: 20,
            n_moderators: 3,
            var_range: (0.01, 0.05),
            bins: 10,
        }
    }
}

/// Rank-uniformity report for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcParamReport {
    pub name: String,
    pub histogram: Vec<usize>,
    pub chi_square: f64,
    pub p_value: f64,
    /// Set when `p_value < .01`.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcReport {
    pub replications: usize,
    /// Number of distinct rank values (retained draws + 1).
    pub rank_levels: usize,
    pub parameters: Vec<SbcParamReport>,
}

impl SbcReport {
    pub fn parameter(&self, name: &str) -> Option<&SbcParamReport> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn any_flagged(&self) -> bool {
        self.parameters.iter().any(|p| p.flagged)
    }
}

/// Runs `replications` prior-predictive replications of the reduced model
/// and reports per-parameter rank histograms with chi-square uniformity
/// p-values. Zero replications yield an empty report.
pub fn sbc_check(
    prior: &PriorConfig,
    config: &McmcConfig,
    replications: usize,
    setup: &SbcSetup,
) -> Result<SbcReport> {
    prior.validate()?;
    config.validate()?;
    let rank_levels = config.retained() + 1;
    if setup.bins < 2 || rank_levels % setup.bins != 0 {
        return Err(Error::Domain(format!(
            "bins = {} must divide rank levels = {rank_levels}",
            setup.bins
        )));
    }
    if setup.n_obs < 3 || setup.n_moderators == 0 {
        return Err(Error::Domain("reduced model too small".into()));
    }
    if !(setup.var_range.0 > 0.0 && setup.var_range.1 >= setup.var_range.0) {
        return Err(Error::Domain(format!(
            "invalid var_range {:?}",
            setup.var_range
        )));
    }

    let tracked: Vec<String> = {
        let mut t = vec!["beta[0]".to_string(), "beta[1]".to_string()];
        t.push("phi".into());
        t.push("sigma_omega".into());
        if prior.mu_variance_fixed.is_none() {
            t.push("sigma_mu2".into());
        }
        t
    };
    let mut histograms: Vec<Vec<usize>> = vec![vec![0; setup.bins]; tracked.len()];
    let per_bin = rank_levels / setup.bins;

    for rep in 0..replications {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(config.seed);
        gen_rng.set_stream(0x5bc0_0000_0000_u64 + rep as u64);
        let (dataset, truth) = simulate_replication(&mut gen_rng, prior, setup)?;

        let mut fit_cfg = config.clone();
        fit_cfg.seed = config
            .seed
            .wrapping_add((rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let chain = run_chain(&dataset, prior, &fit_cfg)?;

        for (t, name) in tracked.iter().enumerate() {
            let series = chain
                .series(name)
                .ok_or_else(|| Error::ChainFormat(format!("missing series `{name}`")))?;
            let true_value = truth.value(name);
            let rank = series
                .iter()
                .filter(|v| matches!(v, Some(d) if *d < true_value))
                .count();
            histograms[t][rank / per_bin] += 1;
        }
    }

    let parameters = tracked
        .into_iter()
        .zip(histograms)
        .map(|(name, histogram)| {
            let (chi_square, p_value) = chi_square_uniformity(&histogram, replications);
            SbcParamReport {
                name,
                flagged: replications > 0 && p_value < 0.01,
                histogram,
                chi_square,
                p_value,
            }
        })
        .collect();
    Ok(SbcReport {
        replications,
        rank_levels,
        parameters,
    })
}

struct TrueParams {
    beta: Vec<f64>,
    phi: f64,
    sigma_mu2: f64,
    sigma_omega: f64,
}

impl TrueParams {
    fn value(&self, name: &str) -> f64 {
        match name {
            "beta[0]" => self.beta[0],
            "beta[1]" => self.beta[1],
            "phi" => self.phi,
            "sigma_mu2" => self.sigma_mu2,
            "sigma_omega" => self.sigma_omega,
            other => panic!("untracked parameter {other}"),
        }
    }
}

fn simulate_replication<R: Rng>(
    rng: &mut R,
    prior: &PriorConfig,
    setup: &SbcSetup,
) -> Result<(crate::dataset::StandardizedDataset, TrueParams)> {
    let n = setup.n_obs;
    let p = setup.n_moderators;
    let schema = ModeratorSchema::continuous(p);

    let (v_lo, v_hi) = setup.var_range;
    let records: Vec<EffectSizeRecord> = (0..n)
        .map(|i| EffectSizeRecord {
            study_id: format!("sim{i}"),
            y: 0.0,
            var: (v_lo.ln() + rng.gen::<f64>() * (v_hi.ln() - v_lo.ln())).exp(),
            x: (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        })
        .collect();
    let mut dataset = standardize(&records, &schema)?;

    // parameters from the prior
    let beta: Vec<f64> = (0..=p)
        .map(|k| {
            let sd = if k == 0 {
                prior.beta0_var.sqrt()
            } else {
                prior.slope_var.sqrt()
            };
            sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let phi = Gamma::new(prior.phi_shape, 1.0 / prior.phi_rate)
        .expect("valid gamma")
        .sample(rng);
    let sigma_mu2 = match prior.mu_variance_fixed {
        Some(v) => v,
        None => rng.gen::<f64>() * prior.sigma_mu2_upper,
    };
    let mu_var = prior.mu_variance_fixed.unwrap_or(sigma_mu2);
    let beta_omega: Vec<f64> = (0..=p)
        .map(|_| prior.beta_omega_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let sigma_omega = if prior.sigma_omega_variance_gamma {
        let s2: f64 = Gamma::new(1.0, 1.0).unwrap().sample(rng);
        s2.sqrt()
    } else {
        let tau: f64 = Gamma::new(
            prior.sigma_omega_prec_shape,
            1.0 / prior.sigma_omega_prec_rate,
        )
        .expect("valid gamma")
        .sample(rng);
        tau.powf(-0.5)
    };

    // latent cells: z = ceil(nu) with nu ~ N(x'beta_omega, sigma_omega^2)
    let z: Vec<i32> = (0..n)
        .map(|i| {
            let eta = crate::model::dot(&dataset.design_row(i), &beta_omega);
            let nu = eta + sigma_omega * rng.sample::<f64, _>(StandardNormal);
            nu.ceil() as i32
        })
        .collect();
    let j_lo = z.iter().copied().min().unwrap().min(0);
    let j_hi = z.iter().copied().max().unwrap().max(0);
    let mu: Vec<f64> = (j_lo..=j_hi)
        .map(|_| mu_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();

    for i in 0..n {
        let design = dataset.design_row(i);
        let location = crate::model::dot(&design, &beta) + mu[(z[i] - j_lo) as usize];
        let sd = (phi * dataset.records[i].var).sqrt();
        dataset.records[i].y = location + sd * rng.sample::<f64, _>(StandardNormal);
    }
    Ok((
        dataset,
        TrueParams {
            beta,
            phi,
            sigma_mu2,
            sigma_omega,
        },
    ))
}

fn chi_square_uniformity(histogram: &[usize], replications: usize) -> (f64, f64) {
    if replications == 0 {
        return (0.0, 1.0);
    }
    let bins = histogram.len();
    let expected = replications as f64 / bins as f64;
    let chi: f64 = histogram
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    (chi, stats::chi_squared_sf(chi, (bins - 1) as f64))
}
