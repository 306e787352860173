//! Sparse weighted nearest-neighbor inference for extreme multi-label
//! classification.
//!
//! A query is scored against every training entry that shares at least one
//! non-zero feature with it, found through an inverted index. The similarity
//! is `J(x, x_i)^beta * cos(x, x_i)` where `J` is the Jaccard similarity of the
//! two supports. The `S` most similar entries then vote for their labels with
//! weight `sim^alpha`.
//!
//! ```
//! use swnn_core::{parse_dataset_str, predict, HyperParams, TrainingIndex};
//!
//! let train = parse_dataset_str("3 4 3\n0 0:1 1:1\n1 1:1 2:1\n2 3:1\n").unwrap();
//! let index = TrainingIndex::build(&train);
//! let query = &train.entries[0].features;
//! let hp = HyperParams::new(2, 1.0, 1, 3).unwrap();
//! let p = predict(&index, query, &hp);
//! assert_eq!(p.ranked[0].0, 0);
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
pub mod index;
pub mod knn;
pub mod ovr;
pub mod sparse;
pub mod synth;

pub use dataset::{
    dataset_statistics, parse_dataset, parse_dataset_str, summarize, write_dataset, Dataset,
    DatasetStatistics, Entry, FiveNumberSummary, LabelId, LabelSet,
};
pub use error::{Error, IndexFormatError, ParseError};
pub use eval::{
    benchmark, evaluate, max_precision_at_k, precision_at_k, score_predictions, BenchReport,
    EvalDiagnostics, EvalReport, EvalRun, MetricMap,
};
pub use index::{CandidateScore, EntryId, ScoreStats, Scratch, SupportMode, TrainingIndex};
pub use knn::{
    format_ranked, format_score, parse_ranked, predict, predict_batch, BatchResult, Fallback,
    LatencyStats, Neighbor, PredictOptions, Prediction, Predictor,
};
pub use ovr::{load_weights, ovr_scores, write_weights, OvrScratch, SparseWeightIndex};
pub use sparse::{
    cosine, dot, gram_min_eigenvalue, gram_min_eigenvalue_capped, jaccard, norm2, sim, FeatureId,
    HyperParams, SparseVector, GRAM_CAP,
};
pub use synth::SyntheticConfig;
