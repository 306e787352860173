//! Seeded synthetic datasets for tests and benchmarks.
//!
//! With `topics > 0` the feature and label spaces are cut into that many
//! contiguous blocks; each entry draws most of its features and all of its
//! labels from one block, which gives nearest-neighbor voting something to
//! find.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Entry};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_entries: usize,
    pub num_features: usize,
    pub num_labels: usize,
    /// Inclusive range of non-zeros per entry.
    pub nnz: (usize, usize),
    /// Inclusive range of labels per entry.
    pub labels_per_entry: (usize, usize),
    pub topics: usize,
    /// Draw values from {1, 2, 3} instead of (0, 1], which makes exact
    /// similarity ties common.
    pub integer_values: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_entries: 1000,
            num_features: 1000,
            num_labels: 100,
            nnz: (1, 20),
            labels_per_entry: (1, 5),
            topics: 10,
            integer_values: false,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn generate(&self) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let entries = (0..self.num_entries)
            .map(|_| self.entry(&mut rng))
            .collect();
        Dataset::new(self.num_features, self.num_labels, entries)
            .expect("generated ids are within declared dimensions")
    }

    /// First `num_entries - n_test` entries for training, the rest for testing.
    pub fn generate_split(&self, n_test: usize) -> (Dataset, Dataset) {
        let mut all = self.generate();
        let cut = all.entries.len().saturating_sub(n_test);
        let test = all.entries.split_off(cut);
        let test = Dataset {
            num_features: all.num_features,
            num_labels: all.num_labels,
            entries: test,
        };
        (all, test)
    }

    fn block(&self, total: usize, topic: usize) -> (usize, usize) {
        let t = self.topics.max(1);
        let lo = topic * total / t;
        let hi = ((topic + 1) * total / t).max(lo + 1).min(total);
        (lo, hi)
    }

    fn entry(&self, rng: &mut ChaCha8Rng) -> Entry {
        let topic = if self.topics > 0 {
            rng.random_range(0..self.topics)
        } else {
            0
        };
        let d = self.num_features;
        let nnz = rng.random_range(self.nnz.0..=self.nnz.1).min(d);

        let mut ids: Vec<u32> = if self.topics > 0 {
            let (lo, hi) = self.block(d, topic);
            let mut picked = std::collections::BTreeSet::new();
            while picked.len() < nnz {
                let f = if rng.random_bool(0.8) {
                    rng.random_range(lo..hi)
                } else {
                    rng.random_range(0..d)
                };
                picked.insert(f as u32);
            }
            picked.into_iter().collect()
        } else {
            sample(rng, d, nnz).into_iter().map(|f| f as u32).collect()
        };
        ids.sort_unstable();
        let features = SparseVector::new(ids.into_iter().map(|f| {
            let v = if self.integer_values {
                rng.random_range(1..=3) as f64
            } else {
                1.0 - rng.random::<f64>()
            };
            (f, v)
        }))
        .expect("ids are sorted and unique");

        let (lo, hi) = if self.topics > 0 {
            self.block(self.num_labels, topic)
        } else {
            (0, self.num_labels)
        };
        let k = rng
            .random_range(self.labels_per_entry.0..=self.labels_per_entry.1)
            .min(hi - lo);
        let labels = sample(rng, hi - lo, k)
            .into_iter()
            .map(|l| (lo + l) as u32)
            .collect();
        Entry { features, labels }
    }
}

/// Unit-normalized vectors over `dim` features where each coordinate is
/// non-zero with probability `density`, values uniform in (0, 1].
pub fn unit_vectors(count: usize, dim: usize, density: f64, seed: u64) -> Vec<SparseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut pairs: Vec<(u32, f64)> = Vec::new();
            for f in 0..dim as u32 {
                if rng.random_bool(density) {
                    pairs.push((f, 1.0 - rng.random::<f64>()));
                }
            }
            if pairs.is_empty() {
                pairs.push((rng.random_range(0..dim as u32), 1.0));
            }
            let norm = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
            SparseVector::new(pairs.into_iter().map(|(f, v)| (f, v / norm))).expect("ascending ids")
        })
        .collect()
}
