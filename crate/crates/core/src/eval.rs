//! Precision@K, the best achievable Precision@K, and full evaluation runs.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelId, LabelSet};
use crate::error::Error;
use crate::index::TrainingIndex;
use crate::knn::{predict_batch, LatencyStats, PredictOptions, Prediction, Predictor};
use crate::sparse::{HyperParams, SparseVector};

impl AsRef<[(LabelId, f64)]> for Prediction {
    fn as_ref(&self) -> &[(LabelId, f64)] {
        &self.ranked
    }
}

fn check(n_pred: usize, truths: &[LabelSet], k: usize) -> Result<(), Error> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if truths.is_empty() {
        return Err(Error::Empty("test set is empty"));
    }
    if n_pred != truths.len() {
        return Err(Error::LengthMismatch {
            predictions: n_pred,
            truths: truths.len(),
        });
    }
    Ok(())
}

/// Mean over entries of (true labels among the first `k` predicted) / `k`.
/// Rankings shorter than `k` count the missing ranks as misses.
pub fn precision_at_k<P: AsRef<[(LabelId, f64)]>>(
    predictions: &[P],
    truths: &[LabelSet],
    k: usize,
) -> Result<f64, Error> {
    check(predictions.len(), truths, k)?;
    let hits: u64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            p.as_ref()
                .iter()
                .take(k)
                .filter(|&&(l, _)| t.contains(l))
                .count() as u64
        })
        .sum();
    Ok(hits as f64 / (k as f64 * truths.len() as f64))
}

/// Mean over entries of `min(k, |labels|) / k`.
pub fn max_precision_at_k(truths: &[LabelSet], k: usize) -> Result<f64, Error> {
    check(truths.len(), truths, k)?;
    let best: u64 = truths.iter().map(|t| t.len().min(k) as u64).sum();
    Ok(best as f64 / (k as f64 * truths.len() as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDiagnostics {
    /// Test features beyond the training dimension.
    pub unseen_features: u64,
    /// Posting entries read across all queries.
    pub postings_visited: u64,
    /// Queries that produced no ranked label.
    pub empty_predictions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hyper_params: HyperParams,
    pub n_test: usize,
    pub precision_at: BTreeMap<usize, f64>,
    pub max_precision_at: BTreeMap<usize, f64>,
    pub diagnostics: EvalDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<LatencyStats>,
}

impl EvalReport {
    pub fn without_latency(&self) -> EvalReport {
        EvalReport {
            latency: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let hp = &self.hyper_params;
        let mut s = format!(
            "S={} alpha={} beta={} n_test={}\n",
            hp.s, hp.alpha, hp.beta, self.n_test
        );
        let _ = writeln!(s, "{:<6} {:>10} {:>10}", "K", "P@K", "max P@K");
        for (k, p) in &self.precision_at {
            let _ = writeln!(
                s,
                "{:<6} {:>9.2}% {:>9.2}%",
                k,
                100.0 * p,
                100.0 * self.max_precision_at[k]
            );
        }
        if let Some(l) = &self.latency {
            let _ = writeln!(
                s,
                "latency: mean {:.4} ms, p50 {:.4} ms, p99 {:.4} ms, {:.1} queries/s",
                l.mean_ms, l.p50_ms, l.p99_ms, l.queries_per_sec
            );
        }
        s
    }
}

/// Metric value per K.
pub type MetricMap = BTreeMap<usize, f64>;

/// Both metric maps for the given `ks`.
pub fn score_predictions<P: AsRef<[(LabelId, f64)]>>(
    predictions: &[P],
    truths: &[LabelSet],
    ks: &[usize],
) -> Result<(MetricMap, MetricMap), Error> {
    let mut precision = BTreeMap::new();
    let mut best = BTreeMap::new();
    for &k in ks {
        precision.insert(k, precision_at_k(predictions, truths, k)?);
        best.insert(k, max_precision_at_k(truths, k)?);
    }
    Ok((precision, best))
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
}

/// Predicts every test entry and scores it. Rankings are produced with
/// `max(top_k, max(ks))` labels so every requested K is fully covered.
pub fn evaluate(
    index: &TrainingIndex,
    test: &Dataset,
    hp: &HyperParams,
    ks: &[usize],
    workers: usize,
    options: PredictOptions,
    measure_latency: bool,
) -> Result<EvalRun, Error> {
    hp.validate()?;
    if ks.is_empty() {
        return Err(Error::Empty("no K values requested"));
    }
    let mut ks: Vec<usize> = ks
        .iter()
        .copied()
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    ks.sort_unstable();
    let mut run_hp = *hp;
    run_hp.top_k = hp.top_k.max(*ks.last().unwrap());

    let queries: Vec<_> = test.features().cloned().collect();
    let truths: Vec<LabelSet> = test.labels().cloned().collect();
    let predictor = Predictor::new(index, run_hp, options);
    let batch = predict_batch(&predictor, &queries, workers, measure_latency);
    let (precision_at, max_precision_at) = score_predictions(&batch.predictions, &truths, &ks)?;

    let report = EvalReport {
        hyper_params: *hp,
        n_test: truths.len(),
        precision_at,
        max_precision_at,
        diagnostics: EvalDiagnostics {
            unseen_features: batch.stats.unseen_features,
            postings_visited: batch.stats.postings_visited,
            empty_predictions: batch
                .predictions
                .iter()
                .filter(|p| p.ranked.is_empty())
                .count() as u64,
        },
        latency: batch.latency,
    };
    Ok(EvalRun {
        report,
        predictions: batch.predictions,
    })
}

/// Single-thread latency and work counters for a batch of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub hyper_params: HyperParams,
    pub num_entries: usize,
    pub num_features: usize,
    pub index_postings: usize,
    pub latency: LatencyStats,
    pub total_postings_visited: u64,
    pub total_entries_touched: u64,
    pub postings_visited_per_query: f64,
    pub entries_touched_per_query: f64,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let l = &self.latency;
        let hp = &self.hyper_params;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "S={} alpha={} beta={} top_k={}",
            hp.s, hp.alpha, hp.beta, hp.top_k
        );
        let _ = writeln!(
            s,
            "index: {} entries, {} features, {} postings",
            self.num_entries, self.num_features, self.index_postings
        );
        let _ = writeln!(s, "queries:            {}", l.queries);
        let _ = writeln!(s, "mean latency:       {:.4} ms", l.mean_ms);
        let _ = writeln!(s, "p50 latency:        {:.4} ms", l.p50_ms);
        let _ = writeln!(s, "p99 latency:        {:.4} ms", l.p99_ms);
        let _ = writeln!(s, "throughput:         {:.1} queries/s", l.queries_per_sec);
        let _ = writeln!(
            s,
            "postings per query: {:.1}",
            self.postings_visited_per_query
        );
        let _ = writeln!(
            s,
            "entries per query:  {:.1}",
            self.entries_touched_per_query
        );
        s
    }
}

/// Runs every query on the calling thread, after predicting up to ten
/// queries once to warm caches.
pub fn benchmark(
    index: &TrainingIndex,
    queries: &[SparseVector],
    hp: &HyperParams,
    options: PredictOptions,
) -> Result<BenchReport, Error> {
    hp.validate()?;
    if queries.is_empty() {
        return Err(Error::Empty("no benchmark queries"));
    }
    let predictor = Predictor::new(index, *hp, options);
    let warm = &queries[..queries.len().min(10)];
    let _ = predict_batch(&predictor, warm, 1, false);
    let batch = predict_batch(&predictor, queries, 1, true);
    let n = queries.len() as f64;
    Ok(BenchReport {
        hyper_params: *hp,
        num_entries: index.num_entries(),
        num_features: index.num_features(),
        index_postings: index.nnz(),
        latency: batch.latency.expect("non-empty batch"),
        total_postings_visited: batch.stats.postings_visited,
        total_entries_touched: batch.stats.entries_touched,
        postings_visited_per_query: batch.stats.postings_visited as f64 / n,
        entries_touched_per_query: batch.stats.entries_touched as f64 / n,
    })
}
