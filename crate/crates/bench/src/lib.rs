//! Shared fixtures for the criterion benchmarks.

use swnn_core::{Dataset, SparseVector, SyntheticConfig, TrainingIndex};

/// Training set of `n` entries over `d` features with `nnz` non-zeros each,
/// plus `queries` held-out feature vectors drawn from the same generator.
pub fn fixture(
    n: usize,
    d: usize,
    nnz: usize,
    queries: usize,
) -> (Dataset, TrainingIndex, Vec<SparseVector>) {
    let cfg = SyntheticConfig {
        num_entries: n,
        num_features: d,
        num_labels: (n / 10).max(1),
        nnz: (nnz, nnz),
        labels_per_entry: (1, 5),
        topics: 0,
        integer_values: false,
        seed: 1,
    };
    let train = cfg.generate();
    let index = TrainingIndex::build(&train);
    let q = SyntheticConfig {
        num_entries: queries,
        seed: 2,
        ..cfg
    }
    .generate()
    .features()
    .cloned()
    .collect();
    (train, index, q)
}
