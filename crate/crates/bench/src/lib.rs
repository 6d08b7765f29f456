//! Shared fixtures for the criterion benchmarks.

use h2meta_core::dataset::{standardize, EffectSizeRecord, ModeratorSchema, StandardizedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Synthetic standardized dataset with `n` observations and `p` continuous
/// moderators.
pub fn synthetic_dataset(seed: u64, n: usize, p: usize) -> StandardizedDataset {
    let schema = ModeratorSchema::continuous(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<EffectSizeRecord> = (0..n)
        .map(|i| EffectSizeRecord {
            study_id: format!("S{i}"),
            y: 0.0,
            var: 0.002 + rng.gen::<f64>() * 0.01,
            x: (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        })
        .collect();
    let mut dataset = standardize(&raw, &schema).unwrap();
    for i in 0..n {
        let noise: f64 = rng.sample(StandardNormal);
        let x1 = dataset.records[i].x[0];
        let var = dataset.records[i].var;
        dataset.records[i].y = 0.5 + 0.1 * x1 + var.sqrt() * noise;
    }
    dataset
}
