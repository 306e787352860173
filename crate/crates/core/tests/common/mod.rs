//! Brute-force reference implementations. These deliberately avoid the
//! inverted index and bounded selection used by the library.
#![allow(dead_code)]

use std::collections::HashMap;

use swnn_core::{sim, Dataset, HyperParams, LabelId, SparseVector, SyntheticConfig};

/// Every training entry with `sim > 0`, sorted by (sim desc, id asc).
pub fn full_scan(train: &Dataset, x: &SparseVector, beta: u32) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = train
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (i as u32, sim(x, &e.features, beta)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

pub struct OraclePrediction {
    pub neighbors: Vec<(u32, f64)>,
    pub ranked: Vec<(LabelId, f64)>,
}

pub fn brute_force_predict(
    train: &Dataset,
    x: &SparseVector,
    hp: &HyperParams,
) -> OraclePrediction {
    let mut neighbors = full_scan(train, x, hp.beta);
    neighbors.truncate(hp.s);
    let mut votes: HashMap<LabelId, f64> = HashMap::new();
    for &(i, s) in &neighbors {
        let w = if hp.alpha == 0.0 {
            1.0
        } else {
            s.powf(hp.alpha)
        };
        for l in train.entries[i as usize].labels.iter() {
            *votes.entry(l).or_default() += w;
        }
    }
    let mut ranked: Vec<(LabelId, f64)> = votes.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.truncate(hp.top_k);
    OraclePrediction { neighbors, ranked }
}

pub fn to_dense(x: &SparseVector, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (f, v) in x.iter() {
        out[f as usize] = v;
    }
    out
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random dataset shapes within the bounds n <= 500, d <= 1000, <= 20 nnz,
/// <= 10 labels per entry.
pub fn random_config(seed: u64) -> SyntheticConfig {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let d = rng.random_range(20..=1000);
    let topics = rng.random_range(0..=8);
    SyntheticConfig {
        num_entries: rng.random_range(1..=500),
        num_features: d,
        num_labels: rng.random_range(10..=300),
        nnz: (1, rng.random_range(1..=20)),
        labels_per_entry: (0, rng.random_range(1..=10)),
        topics,
        integer_values: rng.random_bool(0.5),
        seed,
    }
}
