mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swnn_core::{
    cosine, predict, HyperParams, ScoreStats, Scratch, SparseVector, SupportMode, SyntheticConfig,
    TrainingIndex,
};

fn queries_for(train: &swnn_core::Dataset, seed: u64, count: usize) -> Vec<SparseVector> {
    let mut cfg = common::random_config(seed);
    cfg.num_features = train.num_features;
    cfg.num_labels = train.num_labels;
    cfg.num_entries = count;
    cfg.seed = seed.wrapping_add(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cfg.generate()
        .entries
        .into_iter()
        .map(|e| {
            if !train.entries.is_empty() && rng.random_bool(0.3) {
                let i = rng.random_range(0..train.num_entries());
                train.entries[i].features.clone()
            } else {
                e.features
            }
        })
        .collect()
}

#[test]
fn candidates_match_full_scan() {
    for seed in 0..20 {
        let train = common::random_config(seed).generate();
        let idx = TrainingIndex::build(&train);
        for x in queries_for(&train, seed, 15) {
            for beta in 0..3 {
                let mut got: Vec<(u32, f64)> = idx
                    .score_candidates(&x, beta)
                    .into_iter()
                    .map(|c| (c.entry_id, c.sim))
                    .collect();
                got.sort_by_key(|c| c.0);
                let mut want = common::full_scan(&train, &x, beta);
                want.sort_by_key(|c| c.0);
                assert_eq!(got.len(), want.len(), "seed {seed}");
                for (g, w) in got.iter().zip(&want) {
                    assert_eq!(g.0, w.0);
                    assert!(common::rel_close(g.1, w.1, 1e-9));
                }
            }
        }
    }
}

#[test]
fn candidate_count_bounded_by_posting_hits() {
    let train = SyntheticConfig {
        num_entries: 400,
        seed: 3,
        ..Default::default()
    }
    .generate();
    let idx = TrainingIndex::build(&train);
    let mut scratch = Scratch::new(idx.num_entries());
    for x in queries_for(&train, 3, 50) {
        let mut stats = ScoreStats::default();
        let c = idx.score_candidates_with(&x, 1, SupportMode::Full, &mut scratch, &mut stats);
        let bound: usize = x.ids().iter().map(|&f| idx.postings(f).0.len()).sum();
        assert_eq!(stats.postings_visited as usize, bound);
        assert!(c.len() <= bound);
        assert!(stats.entries_touched as usize >= c.len());
    }
}

#[test]
fn out_of_vocabulary_query_features() {
    let train = SyntheticConfig {
        num_entries: 100,
        num_features: 50,
        seed: 9,
        ..Default::default()
    }
    .generate();
    let idx = TrainingIndex::build(&train);
    let mut pairs: Vec<(u32, f64)> = train.entries[0].features.iter().collect();
    pairs.push((75, 1.0));
    pairs.push((80, 2.0));
    let x = SparseVector::new(pairs).unwrap();
    let hp = HyperParams::new(5, 1.0, 1, 5).unwrap();
    let got = predict(&idx, &x, &hp);
    let want = common::brute_force_predict(&train, &x, &hp);
    assert_eq!(
        got.neighbor_ids(),
        want.neighbors.iter().map(|n| n.0).collect::<Vec<_>>()
    );
}

#[test]
fn predict_matches_brute_force() {
    let grid = [
        (0.0, 0),
        (0.5, 0),
        (1.0, 0),
        (1.0, 1),
        (2.0, 0),
        (2.0, 1),
        (1.0, 3),
    ];
    for seed in 100..115 {
        let train = common::random_config(seed).generate();
        let idx = TrainingIndex::build(&train);
        for (qi, x) in queries_for(&train, seed, 10).into_iter().enumerate() {
            let (alpha, beta) = grid[qi % grid.len()];
            let hp = HyperParams::new(1 + qi * 3, alpha, beta, 1 + qi % 7).unwrap();
            let got = predict(&idx, &x, &hp);
            let want = common::brute_force_predict(&train, &x, &hp);
            assert_eq!(
                got.neighbor_ids(),
                want.neighbors.iter().map(|n| n.0).collect::<Vec<_>>()
            );
            assert_eq!(
                got.labels().collect::<Vec<_>>(),
                want.ranked.iter().map(|r| r.0).collect::<Vec<_>>()
            );
            for (g, w) in got.ranked.iter().zip(&want.ranked) {
                assert!(common::rel_close(g.1, w.1, 1e-9));
            }
        }
    }
}

#[test]
fn unweighted_votes_are_label_counts() {
    let train = SyntheticConfig {
        num_entries: 300,
        integer_values: true,
        seed: 11,
        ..Default::default()
    }
    .generate();
    let idx = TrainingIndex::build(&train);
    let hp = HyperParams::new(15, 0.0, 1, 1000).unwrap();
    for x in queries_for(&train, 11, 30) {
        let p = predict(&idx, &x, &hp);
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for n in &p.neighbors {
            for l in train.entries[n.entry_id as usize].labels.iter() {
                *counts.entry(l).or_default() += 1;
            }
        }
        assert_eq!(p.ranked.len(), counts.len());
        for (l, s) in &p.ranked {
            assert_eq!(*s, counts[l] as f64);
        }
    }
}

#[test]
fn beta_zero_is_cosine_knn() {
    let train = SyntheticConfig {
        num_entries: 300,
        seed: 12,
        ..Default::default()
    }
    .generate();
    let idx = TrainingIndex::build(&train);
    let hp = HyperParams::new(10, 1.0, 0, 5).unwrap();
    for x in queries_for(&train, 12, 30) {
        let p = predict(&idx, &x, &hp);
        let mut by_cos: Vec<(u32, f64)> = train
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.features.ids().iter().any(|f| x.ids().contains(f)))
            .map(|(i, e)| (i as u32, cosine(&x, &e.features)))
            .filter(|c| c.1 > 0.0)
            .collect();
        by_cos.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        by_cos.truncate(10);
        assert_eq!(
            p.neighbor_ids(),
            by_cos.iter().map(|c| c.0).collect::<Vec<_>>()
        );
    }
}

#[test]
fn repeated_queries_are_bit_identical() {
    let train = SyntheticConfig {
        seed: 13,
        ..Default::default()
    }
    .generate();
    let idx = TrainingIndex::build(&train);
    let hp = HyperParams::default();
    for x in queries_for(&train, 13, 20) {
        let a = predict(&idx, &x, &hp);
        let b = predict(&idx, &x, &hp);
        assert_eq!(a, b);
        for (p, q) in a.ranked.iter().zip(&b.ranked) {
            assert_eq!(p.1.to_bits(), q.1.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Growing S only appends neighbors, so no label score can drop.
    #[test]
    fn votes_are_monotone_in_s(seed in 0u64..1000, s in 1usize..30, alpha in 0.0f64..3.0, beta in 0u32..3) {
        let train = SyntheticConfig { num_entries: 120, num_features: 60, seed, ..Default::default() }.generate();
        let idx = TrainingIndex::build(&train);
        let x = &train.entries[(seed % 120) as usize].features;
        let small = predict(&idx, x, &HyperParams::new(s, alpha, beta, 10_000).unwrap());
        let large = predict(&idx, x, &HyperParams::new(s + 1, alpha, beta, 10_000).unwrap());
        let larger: HashMap<u32, f64> = large.ranked.iter().copied().collect();
        for (l, score) in &small.ranked {
            prop_assert!(larger[l] >= *score);
        }
        prop_assert!(large.neighbors.starts_with(&small.neighbors));
    }

    #[test]
    fn prediction_invariants(seed in 0u64..1000, top_k in 1usize..8) {
        let train = SyntheticConfig { num_entries: 150, num_features: 80, seed, ..Default::default() }.generate();
        let idx = TrainingIndex::build(&train);
        let x = &train.entries[(seed % 150) as usize].features;
        let p = predict(&idx, x, &HyperParams::new(7, 1.0, 1, top_k).unwrap());
        prop_assert!(p.ranked.len() <= top_k);
        prop_assert!(p.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        prop_assert!(p.neighbors.windows(2).all(|w| w[0].sim >= w[1].sim));
        for (l, s) in &p.ranked {
            prop_assert!(*s >= 0.0);
            prop_assert!(p.neighbors.iter().any(|n| train.entries[n.entry_id as usize].labels.contains(*l)));
        }
    }
}
