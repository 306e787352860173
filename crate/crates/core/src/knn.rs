//! Weighted nearest-neighbor voting over index candidates.
//!
//! For a query `x` the top-S candidates by similarity (ties by ascending entry
//! ID) each add `sim^alpha` to every label they carry. Labels are ranked by
//! accumulated score, ties by ascending label ID.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabelId;
use crate::index::{CandidateScore, EntryId, ScoreStats, Scratch, SupportMode, TrainingIndex};
use crate::sparse::{HyperParams, SparseVector};

/// What to return when no training entry has positive similarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fallback {
    /// Empty ranking.
    #[default]
    None,
    /// Globally most frequent training labels, scored by relative frequency.
    /// Not part of the weighted-vote classifier itself.
    Popular,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PredictOptions {
    pub support_mode: SupportMode,
    pub fallback: Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub entry_id: EntryId,
    pub sim: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    /// `(label, score)` by descending score, ties ascending label.
    pub ranked: Vec<(LabelId, f64)>,
    /// Neighbors that voted, by descending similarity.
    pub neighbors: Vec<Neighbor>,
}

impl Prediction {
    pub fn neighbor_ids(&self) -> Vec<EntryId> {
        self.neighbors.iter().map(|n| n.entry_id).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.ranked.iter().map(|&(l, _)| l)
    }
}

/// Total order used for neighbor selection: similarity descending, then
/// entry ID ascending.
pub(crate) fn neighbor_order(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.sim.total_cmp(&a.sim).then(a.entry_id.cmp(&b.entry_id))
}

pub(crate) fn label_order(a: &(LabelId, f64), b: &(LabelId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the `s` best candidates, sorted.
fn select_top(mut candidates: Vec<CandidateScore>, s: usize) -> Vec<CandidateScore> {
    if candidates.len() > s {
        candidates.select_nth_unstable_by(s - 1, neighbor_order);
        candidates.truncate(s);
    }
    candidates.sort_unstable_by(neighbor_order);
    candidates
}

fn vote_weight(sim: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        sim.powf(alpha)
    }
}

/// Holds everything that stays fixed across queries.
#[derive(Debug, Clone)]
pub struct Predictor<'a> {
    index: &'a TrainingIndex,
    hp: HyperParams,
    options: PredictOptions,
    popular: Vec<(LabelId, f64)>,
}

impl<'a> Predictor<'a> {
    pub fn new(index: &'a TrainingIndex, hp: HyperParams, options: PredictOptions) -> Self {
        let popular = match options.fallback {
            Fallback::None => Vec::new(),
            Fallback::Popular => {
                let n = index.num_entries().max(1) as f64;
                index
                    .labels_by_frequency()
                    .into_iter()
                    .take(hp.top_k)
                    .map(|(l, c)| (l, c as f64 / n))
                    .collect()
            }
        };
        Predictor {
            index,
            hp,
            options,
            popular,
        }
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn index(&self) -> &TrainingIndex {
        self.index
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self.index.num_entries())
    }

    pub fn predict(
        &self,
        x: &SparseVector,
        scratch: &mut Scratch,
        stats: &mut ScoreStats,
    ) -> Prediction {
        let candidates = self.index.score_candidates_with(
            x,
            self.hp.beta,
            self.options.support_mode,
            scratch,
            stats,
        );
        if candidates.is_empty() {
            return Prediction {
                ranked: self.popular.clone(),
                neighbors: Vec::new(),
            };
        }
        let top = select_top(candidates, self.hp.s);

        let mut scores: HashMap<LabelId, f64> = HashMap::new();
        for c in &top {
            let w = vote_weight(c.sim, self.hp.alpha);
            for l in self.index.labels(c.entry_id).iter() {
                *scores.entry(l).or_insert(0.0) += w;
            }
        }
        let mut ranked: Vec<(LabelId, f64)> = scores.into_iter().collect();
        if ranked.len() > self.hp.top_k {
            ranked.select_nth_unstable_by(self.hp.top_k - 1, label_order);
            ranked.truncate(self.hp.top_k);
        }
        ranked.sort_unstable_by(label_order);

        Prediction {
            ranked,
            neighbors: top
                .into_iter()
                .map(|c| Neighbor {
                    entry_id: c.entry_id,
                    sim: c.sim,
                })
                .collect(),
        }
    }
}

/// Single-query convenience wrapper with default options.
pub fn predict(index: &TrainingIndex, x: &SparseVector, hp: &HyperParams) -> Prediction {
    let p = Predictor::new(index, *hp, PredictOptions::default());
    let mut scratch = p.scratch();
    p.predict(x, &mut scratch, &mut ScoreStats::default())
}

/// Per-query wall-clock latency summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub queries: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub queries_per_sec: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples_ms`. `None` when empty.
    pub fn from_samples(samples_ms: &[f64]) -> Option<Self> {
        if samples_ms.is_empty() {
            return None;
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let total: f64 = sorted.iter().sum();
        Some(LatencyStats {
            queries: n,
            mean_ms: total / n as f64,
            p50_ms: rank(0.50),
            p99_ms: rank(0.99),
            queries_per_sec: if total > 0.0 {
                n as f64 * 1000.0 / total
            } else {
                f64::INFINITY
            },
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchResult {
    pub predictions: Vec<Prediction>,
    /// Present when latency measurement was requested and the batch was non-empty.
    pub latency: Option<LatencyStats>,
    pub stats: ScoreStats,
}

/// Predicts every query. Output order and content do not depend on `workers`.
pub fn predict_batch(
    predictor: &Predictor<'_>,
    queries: &[SparseVector],
    workers: usize,
    measure_latency: bool,
) -> BatchResult {
    let run = |scratch: &mut Scratch, x: &SparseVector| {
        let mut stats = ScoreStats::default();
        let start = Instant::now();
        let p = predictor.predict(x, scratch, &mut stats);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        (p, stats, ms)
    };

    let results: Vec<(Prediction, ScoreStats, f64)> = if workers <= 1 {
        let mut scratch = predictor.scratch();
        queries.iter().map(|x| run(&mut scratch, x)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(|| {
            queries
                .par_iter()
                .map_init(|| predictor.scratch(), |scratch, x| run(scratch, x))
                .collect()
        })
    };

    let mut out = BatchResult::default();
    let mut samples = Vec::with_capacity(if measure_latency { results.len() } else { 0 });
    for (p, s, ms) in results {
        out.predictions.push(p);
        out.stats.add(&s);
        if measure_latency {
            samples.push(ms);
        }
    }
    out.latency = LatencyStats::from_samples(&samples);
    out
}

/// Formats a value with 6 significant digits, `%g` style.
pub fn format_score(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let prec = (5 - exp) as usize;
        trim_zeros(&format!("{x:.prec$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One output line: tab-separated `label:score` pairs.
pub fn format_ranked(ranked: &[(LabelId, f64)]) -> String {
    ranked
        .iter()
        .map(|&(l, s)| format!("{l}:{}", format_score(s)))
        .collect::<Vec<_>>()
        .join("\t")
}

/// Inverse of [`format_ranked`] up to score precision.
pub fn parse_ranked(line: &str) -> Result<Vec<(LabelId, f64)>, String> {
    line.split('\t')
        .filter(|t| !t.trim().is_empty())
        .map(|tok| {
            let (l, s) = tok
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("expected label:score, got {tok:?}"))?;
            let l = l.parse().map_err(|_| format!("invalid label {l:?}"))?;
            let s = s.parse().map_err(|_| format!("invalid score {s:?}"))?;
            Ok((l, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Entry, LabelSet};

    fn ones(ids: &[u32]) -> SparseVector {
        SparseVector::new(ids.iter().map(|&i| (i, 1.0))).unwrap()
    }

    fn dataset(entries: Vec<(SparseVector, Vec<u32>)>, d: usize, l: usize) -> Dataset {
        Dataset::new(
            d,
            l,
            entries
                .into_iter()
                .map(|(features, labels)| Entry {
                    features,
                    labels: LabelSet::new(labels),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_neighbor_vote() {
        // sims 0.9 and 0.5 against q = e0 (unit vectors in the (0,1) plane, beta=0).
        let a = 0.9f64;
        let b = 0.5f64;
        let d = dataset(
            vec![
                (
                    SparseVector::new([(0, a), (1, (1.0 - a * a).sqrt())]).unwrap(),
                    vec![1, 2],
                ),
                (
                    SparseVector::new([(0, b), (1, (1.0 - b * b).sqrt())]).unwrap(),
                    vec![2, 3],
                ),
            ],
            2,
            4,
        );
        let idx = TrainingIndex::build(&d);
        let hp = HyperParams::new(2, 1.0, 0, 3).unwrap();
        let p = predict(&idx, &ones(&[0]), &hp);
        let labels: Vec<u32> = p.labels().collect();
        assert_eq!(labels, vec![2, 1, 3]);
        let expect = [1.4, 0.9, 0.5];
        for ((_, s), e) in p.ranked.iter().zip(expect) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        assert_eq!(p.neighbor_ids(), vec![0, 1]);
    }

    #[test]
    fn exact_match_single_vote() {
        let d = dataset(
            vec![
                (ones(&[0, 3]), vec![1]),
                (SparseVector::new([(1, 2.0), (2, 0.5)]).unwrap(), vec![4]),
                (ones(&[0, 1, 2]), vec![2]),
            ],
            4,
            5,
        );
        let idx = TrainingIndex::build(&d);
        for alpha in [0.0, 0.5, 2.0] {
            for beta in 0..3 {
                let hp = HyperParams::new(1, alpha, beta, 5).unwrap();
                let p = predict(&idx, &d.entries[1].features, &hp);
                assert_eq!(p.ranked.len(), 1);
                assert_eq!(p.ranked[0].0, 4);
                assert!((p.ranked[0].1 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jaccard_rescues_exact_match() {
        let mut entries = vec![(ones(&[1, 2, 4]), vec![1, 2])];
        for _ in 0..4 {
            entries.push((ones(&[1, 2, 4, 5, 8]), vec![3, 5, 6]));
        }
        let idx = TrainingIndex::build(&dataset(entries, 9, 7));
        let q = ones(&[1, 2, 4]);

        let cos = 3.0 / 15f64.sqrt();
        let p0 = predict(&idx, &q, &HyperParams::new(5, 1.0, 0, 5).unwrap());
        let l0: Vec<u32> = p0.labels().collect();
        assert_eq!(l0, vec![3, 5, 6, 1, 2]);
        assert!((p0.ranked[0].1 - 4.0 * cos).abs() < 1e-12);
        assert!((p0.ranked[3].1 - 1.0).abs() < 1e-12);

        let p1 = predict(&idx, &q, &HyperParams::new(5, 1.0, 1, 5).unwrap());
        assert_eq!(p1.neighbors[0].entry_id, 0);
        assert!((p1.neighbors[0].sim - 1.0).abs() < 1e-12);
        assert!((p1.neighbors[1].sim - 0.6 * cos).abs() < 1e-12);
        assert!((p1.ranked[0].1 - 4.0 * 0.6 * cos).abs() < 1e-12);

        // With a single neighbor the exact match wins outright under beta = 1.
        let p = predict(&idx, &q, &HyperParams::new(1, 1.0, 1, 5).unwrap());
        assert_eq!(p.labels().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn neighbor_ties_break_by_entry_id() {
        let entries = (0..6).map(|i| (ones(&[0, 1]), vec![i])).collect();
        let idx = TrainingIndex::build(&dataset(entries, 2, 6));
        let hp = HyperParams::new(3, 1.0, 1, 6).unwrap();
        let p = predict(&idx, &ones(&[0, 1]), &hp);
        assert_eq!(p.neighbor_ids(), vec![0, 1, 2]);
        assert_eq!(p.labels().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn zero_candidates_and_fallback() {
        let d = dataset(
            vec![
                (ones(&[0]), vec![2]),
                (ones(&[0, 1]), vec![2, 0]),
                (ones(&[1]), vec![1]),
            ],
            3,
            3,
        );
        let idx = TrainingIndex::build(&d);
        let hp = HyperParams::new(2, 1.0, 1, 2).unwrap();
        assert!(predict(&idx, &ones(&[2]), &hp).ranked.is_empty());

        let opts = PredictOptions {
            fallback: Fallback::Popular,
            ..Default::default()
        };
        let pred = Predictor::new(&idx, hp, opts);
        let mut scratch = pred.scratch();
        let p = pred.predict(&ones(&[2]), &mut scratch, &mut ScoreStats::default());
        assert_eq!(p.labels().collect::<Vec<_>>(), vec![2, 0]);
        assert!(p.neighbors.is_empty());
    }

    #[test]
    fn batch_is_worker_independent() {
        let entries = (0..40u32)
            .map(|i| {
                (
                    ones(&[i % 7, 7 + i % 5, 12 + i % 3]),
                    vec![i % 9, (i * 7) % 9],
                )
            })
            .collect();
        let idx = TrainingIndex::build(&dataset(entries, 15, 9));
        let queries: Vec<SparseVector> = (0..100u32).map(|i| ones(&[i % 11, 11 + i % 4])).collect();
        let pred = Predictor::new(
            &idx,
            HyperParams::new(5, 1.0, 1, 5).unwrap(),
            Default::default(),
        );
        let one = predict_batch(&pred, &queries, 1, true);
        let eight = predict_batch(&pred, &queries, 8, false);
        assert_eq!(one.predictions, eight.predictions);
        assert_eq!(one.stats, eight.stats);
        assert_eq!(one.latency.unwrap().queries, 100);
        assert!(eight.latency.is_none());
        let empty = predict_batch(&pred, &[], 4, true);
        assert!(empty.predictions.is_empty() && empty.latency.is_none());
    }

    #[test]
    fn latency_percentiles() {
        let samples: Vec<f64> = (1..=100).map(f64::from).collect();
        let l = LatencyStats::from_samples(&samples).unwrap();
        assert_eq!((l.p50_ms, l.p99_ms, l.mean_ms), (50.0, 99.0, 50.5));
        assert!((l.queries_per_sec - 100_000.0 / 5050.0).abs() < 1e-9);
        assert!(LatencyStats::from_samples(&[]).is_none());
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.0), "0");
        assert_eq!(format_score(1.0), "1");
        assert_eq!(format_score(1.4), "1.4");
        assert_eq!(format_score(3.0983866769659336), "3.09839");
        assert_eq!(format_score(123456.7), "123457");
        assert_eq!(format_score(1234567.0), "1.23457e+06");
        assert_eq!(format_score(0.000123456789), "0.000123457");
        assert_eq!(format_score(0.0000123456), "1.23456e-05");
        assert_eq!(format_score(999999.7), "1e+06");
        let line = format_ranked(&[(2, 1.4), (1, 0.9), (3, 0.5)]);
        assert_eq!(line, "2:1.4\t1:0.9\t3:0.5");
        assert_eq!(
            parse_ranked(&line).unwrap(),
            vec![(2, 1.4), (1, 0.9), (3, 0.5)]
        );
        assert!(parse_ranked("").unwrap().is_empty());
        assert!(parse_ranked("x:1").is_err());
    }
}
