//! Reporting-layer contracts: rescaling invariance of predictive densities,
//! the publication-bias probe on planted-bias data, and profile ordering.

mod support;

use h2meta_core::dataset::{standardize, EffectSizeRecord, ModeratorSchema};
use h2meta_core::mcmc::{run_chain, McmcConfig, WindowPolicy};
use h2meta_core::model::PriorConfig;
use h2meta_core::predictive::{
    fit_score, predictive_density, publication_bias_report, GridSpec, PredictiveQuery,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn quick_config(seed: u64) -> McmcConfig {
    McmcConfig {
        iterations: 3000,
        burn_in: 500,
        thin: 5,
        seed,
        batch_count: 10,
        chains: 1,
        window: WindowPolicy::default(),
        skip_updates: Vec::new(),
    }
}

/// Standardization absorbs affine rescaling of a raw moderator column: the
/// same chain draws evaluated through the new standardization yield the
/// same density.
#[test]
fn predictive_density_invariant_to_moderator_rescaling() {
    let schema = ModeratorSchema::continuous(2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let records: Vec<EffectSizeRecord> = (0..20)
        .map(|i| EffectSizeRecord {
            study_id: format!("S{i}"),
            y: 0.5 + 0.1 * rng.sample::<f64, _>(StandardNormal),
            var: 0.005 + 0.003 * rng.gen::<f64>(),
            x: vec![
                50.0 + 10.0 * rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ],
        })
        .collect();
    let dataset = standardize(&records, &schema).unwrap();
    let chain = run_chain(&dataset, &PriorConfig::default(), &quick_config(5)).unwrap();

    // rescale the first raw column (x -> a x + b) and restandardize
    let (a, b) = (0.125, -34.0);
    let rescaled: Vec<EffectSizeRecord> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.x[0] = a * r.x[0] + b;
            r
        })
        .collect();
    let rescaled_std = standardize(&rescaled, &schema).unwrap();

    let query_x = vec![55.0, 0.4];
    let query = PredictiveQuery {
        x: query_x.clone(),
        var_condition: 2e-3,
        grid: GridSpec::default(),
    };
    let mapped_query = PredictiveQuery {
        x: vec![a * query_x[0] + b, query_x[1]],
        var_condition: 2e-3,
        grid: GridSpec::default(),
    };
    let original = predictive_density(&chain, &query, &dataset.standardization).unwrap();
    let mapped =
        predictive_density(&chain, &mapped_query, &rescaled_std.standardization).unwrap();
    for (d0, d1) in original.density.iter().zip(&mapped.density) {
        assert!((d0 - d1).abs() < 1e-9, "{d0} vs {d1}");
    }
}

fn bias_dataset(seed: u64, inflation: f64) -> h2meta_core::dataset::StandardizedDataset {
    let schema = ModeratorSchema::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<EffectSizeRecord> = (0..60)
        .map(|i| {
            // wide spread of standard errors
            let se = 0.03 + 0.27 * (i as f64) / 59.0;
            let var = se * se;
            let mut x = vec![0.0; schema.len()];
            x[schema.index_of("SE").unwrap()] = se;
            x[schema.index_of("PY").unwrap()] = 2000.0;
            x[schema.index_of("mom").unwrap()] = 1.0;
            x[schema.index_of("age").unwrap()] = 96.0 + (i % 7) as f64;
            x[schema.index_of("white60").unwrap()] = 1.0;
            x[schema.index_of("longsampl").unwrap()] = 1.0;
            x[schema.index_of("latitude").unwrap()] = 45.0;
            x[schema.index_of("longitude").unwrap()] = -75.0;
            let noise: f64 = rng.sample(StandardNormal);
            EffectSizeRecord {
                study_id: format!("S{i}"),
                y: 0.35 + inflation * se + 0.5 * se * noise,
                var,
                x,
            }
        })
        .collect();
    standardize(&records, &schema).unwrap()
}

#[test]
fn planted_publication_bias_is_flagged() {
    // effect sizes linearly inflated in their standard error
    let dataset = bias_dataset(77, 1.2);
    let chain = run_chain(&dataset, &PriorConfig::default(), &quick_config(7)).unwrap();
    let report = publication_bias_report(&chain, &dataset.standardization).unwrap();
    assert!(report.slope.significant, "slope CI: ({}, {})", report.slope.ci_lower, report.slope.ci_upper);
    assert!(
        report.bias_indicated,
        "median range {} vs pooled IQR {}",
        report.median_range, report.pooled_iqr
    );

    // no inflation: no flag
    let null = bias_dataset(78, 0.0);
    let chain = run_chain(&null, &PriorConfig::default(), &quick_config(8)).unwrap();
    let report = publication_bias_report(&chain, &null.standardization).unwrap();
    assert!(!report.bias_indicated);
}

#[test]
fn fit_score_decomposes_and_matches_grid_route() {
    let dataset = bias_dataset(79, 0.0);
    let chain = run_chain(&dataset, &PriorConfig::default(), &quick_config(9)).unwrap();
    let score = fit_score(&chain, &dataset).unwrap();
    let total: f64 = score.per_obs.iter().sum();
    assert!((score.total - total).abs() < 1e-9);
    assert!(score.per_obs.iter().all(|d| *d >= 0.0));
    assert!(score.root_summary.min <= score.root_summary.median);
    assert!(score.root_summary.median <= score.root_summary.max);
}
