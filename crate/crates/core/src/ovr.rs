//! Sparse one-vs-rest linear inference.
//!
//! Weights are indexed by feature, so scoring a query reads only the weight
//! rows of its non-zero features: cost is `sum_{j in Supp(x)} |row_j|`, not
//! `L * d`.
//!
//! Weight file format:
//!
//! ```text
//! <num_features> <num_labels>
//! <feature_id> <label_id>:<weight> <label_id>:<weight> ...
//! ```

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::dataset::LabelId;
use crate::error::ParseError;
use crate::sparse::{FeatureId, SparseVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeightIndex {
    num_features: usize,
    num_labels: usize,
    offsets: Vec<usize>,
    labels: Vec<LabelId>,
    weights: Vec<f64>,
}

impl SparseWeightIndex {
    /// Builds from `(feature, label, weight)` triplets. Zero weights are
    /// dropped; a repeated `(feature, label)` pair is an error.
    pub fn from_triplets(
        num_features: usize,
        num_labels: usize,
        mut triplets: Vec<(FeatureId, LabelId, f64)>,
    ) -> Result<Self, String> {
        for &(f, l, w) in &triplets {
            if f as usize >= num_features {
                return Err(format!("feature id {f} >= {num_features}"));
            }
            if l as usize >= num_labels {
                return Err(format!("label id {l} >= {num_labels}"));
            }
            if !w.is_finite() {
                return Err(format!("non-finite weight for ({f}, {l})"));
            }
        }
        triplets.sort_by_key(|&(f, l, _)| (f, l));
        if let Some(p) = triplets
            .windows(2)
            .find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1))
        {
            return Err(format!(
                "duplicate weight for feature {} label {}",
                p[0].0, p[0].1
            ));
        }
        triplets.retain(|&(_, _, w)| w != 0.0);

        let mut offsets = vec![0usize; num_features + 1];
        for &(f, _, _) in &triplets {
            offsets[f as usize + 1] += 1;
        }
        for f in 0..num_features {
            offsets[f + 1] += offsets[f];
        }
        Ok(SparseWeightIndex {
            num_features,
            num_labels,
            offsets,
            labels: triplets.iter().map(|t| t.1).collect(),
            weights: triplets.iter().map(|t| t.2).collect(),
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Stored non-zero weights.
    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    pub fn row(&self, feature: FeatureId) -> (&[LabelId], &[f64]) {
        let f = feature as usize;
        if f >= self.num_features {
            return (&[], &[]);
        }
        let (a, b) = (self.offsets[f], self.offsets[f + 1]);
        (&self.labels[a..b], &self.weights[a..b])
    }

    pub fn scratch(&self) -> OvrScratch {
        OvrScratch {
            scores: vec![0.0; self.num_labels],
            touched: Vec::new(),
            seen: vec![false; self.num_labels],
        }
    }

    /// Top `top_k` labels by `w_l . x`, ties by ascending label ID.
    pub fn scores(&self, x: &SparseVector, top_k: usize) -> Vec<(LabelId, f64)> {
        self.scores_with(x, top_k, &mut self.scratch()).0
    }

    /// Returns the ranking and the number of weight entries read.
    pub fn scores_with(
        &self,
        x: &SparseVector,
        top_k: usize,
        scratch: &mut OvrScratch,
    ) -> (Vec<(LabelId, f64)>, u64) {
        let mut ops = 0u64;
        for (f, xv) in x.iter() {
            let (labels, weights) = self.row(f);
            ops += labels.len() as u64;
            for (&l, &w) in labels.iter().zip(weights) {
                let slot = l as usize;
                if !scratch.seen[slot] {
                    scratch.seen[slot] = true;
                    scratch.touched.push(l);
                }
                scratch.scores[slot] += w * xv;
            }
        }

        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for &l in &scratch.touched {
            let s = scratch.scores[l as usize];
            match s.partial_cmp(&0.0) {
                Some(Ordering::Greater) => positive.push((l, s)),
                Some(Ordering::Less) => negative.push((l, s)),
                _ => {}
            }
        }
        let by_score =
            |a: &(LabelId, f64), b: &(LabelId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        positive.sort_unstable_by(by_score);
        positive.truncate(top_k);

        let mut ranked = positive;
        if ranked.len() < top_k {
            // Zero-score labels, touched or not, in ascending ID order.
            let need = top_k - ranked.len();
            let zeros = (0..self.num_labels as LabelId)
                .filter(|&l| scratch.scores[l as usize] == 0.0)
                .take(need)
                .map(|l| (l, 0.0));
            ranked.extend(zeros);
        }
        if ranked.len() < top_k {
            negative.sort_unstable_by(by_score);
            let need = top_k - ranked.len();
            ranked.extend(negative.into_iter().take(need));
        }

        for &l in &scratch.touched {
            scratch.scores[l as usize] = 0.0;
            scratch.seen[l as usize] = false;
        }
        scratch.touched.clear();
        (ranked, ops)
    }
}

/// Reusable per-query buffers for [`SparseWeightIndex::scores_with`].
#[derive(Debug, Clone)]
pub struct OvrScratch {
    scores: Vec<f64>,
    touched: Vec<LabelId>,
    seen: Vec<bool>,
}

pub fn ovr_scores(w: &SparseWeightIndex, x: &SparseVector, top_k: usize) -> Vec<(LabelId, f64)> {
    w.scores(x, top_k)
}

pub fn load_weights<R: BufRead>(reader: R) -> Result<SparseWeightIndex, ParseError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(ParseError::syntax(1, "missing header")),
    };
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let dims: Vec<usize> = fields.iter().filter_map(|f| f.parse().ok()).collect();
    if fields.len() != 2 || dims.len() != 2 {
        return Err(ParseError::syntax(
            1,
            "header must be `<num_features> <num_labels>`",
        ));
    }
    let (num_features, num_labels) = (dims[0], dims[1]);

    let mut triplets = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let mut toks = line.split_ascii_whitespace();
        let Some(f) = toks.next() else { continue };
        let f: u64 = f
            .parse()
            .map_err(|_| ParseError::syntax(lineno, format!("invalid feature id {f:?}")))?;
        if f >= num_features as u64 {
            return Err(ParseError::OutOfRange {
                line: lineno,
                kind: "feature",
                id: f,
                limit: num_features as u64,
            });
        }
        for tok in toks {
            let (l, w) = tok.split_once(':').ok_or_else(|| {
                ParseError::syntax(lineno, format!("expected label:weight, got {tok:?}"))
            })?;
            let l: u64 = l
                .parse()
                .map_err(|_| ParseError::syntax(lineno, format!("invalid label id {l:?}")))?;
            if l >= num_labels as u64 {
                return Err(ParseError::OutOfRange {
                    line: lineno,
                    kind: "label",
                    id: l,
                    limit: num_labels as u64,
                });
            }
            let w: f64 = w
                .parse()
                .ok()
                .filter(|w: &f64| w.is_finite())
                .ok_or_else(|| ParseError::syntax(lineno, format!("invalid weight {w:?}")))?;
            if !seen.insert((f, l)) {
                return Err(ParseError::Duplicate {
                    line: lineno,
                    what: format!("weight for feature {f} label {l}"),
                });
            }
            triplets.push((f as FeatureId, l as LabelId, w));
        }
    }
    SparseWeightIndex::from_triplets(num_features, num_labels, triplets)
        .map_err(|msg| ParseError::syntax(0, msg))
}

/// Writes one line per feature with at least one weight.
pub fn write_weights<W: Write>(w: &SparseWeightIndex, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", w.num_features, w.num_labels)?;
    let mut line = String::new();
    for f in 0..w.num_features as FeatureId {
        let (labels, weights) = w.row(f);
        if labels.is_empty() {
            continue;
        }
        line.clear();
        let _ = write!(line, "{f}");
        for (l, v) in labels.iter().zip(weights) {
            let _ = write!(line, " {l}:{v}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
