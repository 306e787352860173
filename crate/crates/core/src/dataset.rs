//! Reader and writer for the Extreme Classification Repository text format,
//! plus the descriptive statistics reported for such datasets.
//!
//! ```text
//! <num_entries> <num_features> <num_labels>
//! 0,2 1:1.5 4:2
//!  3:1
//! ```
//!
//! Each body line holds a comma-separated label list followed by
//! space-separated `feature:value` pairs. An entry without labels starts with
//! a space. IDs are 0-based.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError};
use crate::sparse::{FeatureId, SparseVector};

pub type LabelId = u32;

/// Labels attached to one entry, strictly ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet(Vec<LabelId>);

impl LabelSet {
    /// Sorts and deduplicates.
    pub fn new(mut labels: Vec<LabelId>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        LabelSet(labels)
    }

    pub fn as_slice(&self) -> &[LabelId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<LabelId> for LabelSet {
    fn from_iter<I: IntoIterator<Item = LabelId>>(iter: I) -> Self {
        LabelSet::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entry {
    pub features: SparseVector,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_features: usize,
    pub num_labels: usize,
    pub entries: Vec<Entry>,
}

impl Dataset {
    /// Checks that every ID is below the declared dimensions.
    pub fn new(num_features: usize, num_labels: usize, entries: Vec<Entry>) -> Result<Self, Error> {
        for (i, e) in entries.iter().enumerate() {
            if e.features.dim_hint() > num_features {
                return Err(Error::InvalidVector(format!(
                    "entry {i}: feature id {} >= num_features {num_features}",
                    e.features.dim_hint() - 1
                )));
            }
            if let Some(&l) = e.labels.as_slice().last() {
                if l as usize >= num_labels {
                    return Err(Error::InvalidVector(format!(
                        "entry {i}: label id {l} >= num_labels {num_labels}"
                    )));
                }
            }
        }
        Ok(Dataset {
            num_features,
            num_labels,
            entries,
        })
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn features(&self) -> impl Iterator<Item = &SparseVector> {
        self.entries.iter().map(|e| &e.features)
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelSet> {
        self.entries.iter().map(|e| &e.labels)
    }

    /// Mean number of labels per entry, 0 for an empty dataset.
    pub fn mean_labels_per_entry(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|e| e.labels.len()).sum::<usize>() as f64
            / self.entries.len() as f64
    }
}

fn parse_id(tok: &str, line: usize, kind: &'static str, limit: usize) -> Result<u32, ParseError> {
    let id: u64 = tok
        .parse()
        .map_err(|_| ParseError::syntax(line, format!("invalid {kind} id {tok:?}")))?;
    if id >= limit as u64 || id > u32::MAX as u64 {
        return Err(ParseError::OutOfRange {
            line,
            kind,
            id,
            limit: limit as u64,
        });
    }
    Ok(id as u32)
}

fn parse_header(line: &str, lineno: usize) -> Result<[usize; 3], ParseError> {
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 3 {
        return Err(ParseError::syntax(
            lineno,
            format!("header must have 3 fields, found {}", fields.len()),
        ));
    }
    let mut out = [0usize; 3];
    for (slot, f) in out.iter_mut().zip(&fields) {
        *slot = f
            .parse()
            .map_err(|_| ParseError::syntax(lineno, format!("invalid header field {f:?}")))?;
    }
    Ok(out)
}

pub(crate) fn parse_feature_pairs<'a>(
    tokens: impl Iterator<Item = &'a str>,
    lineno: usize,
    num_features: usize,
) -> Result<SparseVector, ParseError> {
    let mut pairs: Vec<(FeatureId, f64)> = Vec::new();
    for tok in tokens {
        let (id, val) = tok.split_once(':').ok_or_else(|| {
            ParseError::syntax(lineno, format!("expected feature:value, got {tok:?}"))
        })?;
        let id = parse_id(id, lineno, "feature", num_features)?;
        let value: f64 = val
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| ParseError::syntax(lineno, format!("invalid value {val:?}")))?;
        pairs.push((id, value));
    }
    pairs.sort_by_key(|&(id, _)| id);
    if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(ParseError::Duplicate {
            line: lineno,
            what: format!("feature id {}", w[0].0),
        });
    }
    SparseVector::new(pairs).map_err(|e| ParseError::syntax(lineno, e.to_string()))
}

fn parse_line(
    line: &str,
    lineno: usize,
    num_features: usize,
    num_labels: usize,
) -> Result<Entry, ParseError> {
    let (label_field, rest) = if line.starts_with([' ', '\t']) {
        ("", line)
    } else {
        line.split_once([' ', '\t']).unwrap_or((line, ""))
    };
    // Some files drop the leading space on label-less lines.
    let (label_field, rest) = if label_field.contains(':') {
        ("", line)
    } else {
        (label_field, rest)
    };
    let mut labels = Vec::new();
    for tok in label_field.split(',').filter(|t| !t.is_empty()) {
        labels.push(parse_id(tok, lineno, "label", num_labels)?);
    }
    let features = parse_feature_pairs(rest.split_ascii_whitespace(), lineno, num_features)?;
    Ok(Entry {
        features,
        labels: LabelSet::new(labels),
    })
}

/// Parses a whole dataset. Errors carry 1-based line numbers.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset, ParseError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(ParseError::syntax(1, "missing header")),
    };
    let [num_entries, num_features, num_labels] = parse_header(header.trim_end_matches('\r'), 1)?;

    // Blank lines are held back until a later non-blank line shows they are
    // entries rather than trailing padding.
    let mut entries = Vec::with_capacity(num_entries);
    let mut pending_blank: Vec<usize> = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            pending_blank.push(lineno);
            continue;
        }
        for _ in pending_blank.drain(..) {
            entries.push(Entry::default());
        }
        entries.push(parse_line(line, lineno, num_features, num_labels)?);
    }
    let missing = num_entries.saturating_sub(entries.len());
    entries.extend(pending_blank.iter().take(missing).map(|_| Entry::default()));
    if entries.len() != num_entries {
        return Err(ParseError::CountMismatch {
            declared: num_entries,
            found: entries.len(),
        });
    }
    Ok(Dataset {
        num_features,
        num_labels,
        entries,
    })
}

pub fn parse_dataset_str(text: &str) -> Result<Dataset, ParseError> {
    parse_dataset(text.as_bytes())
}

/// Writes the canonical form: labels and features ascending, values in
/// shortest round-trip decimal form.
pub fn write_dataset<W: Write>(d: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        d.num_entries(),
        d.num_features,
        d.num_labels
    )?;
    let mut line = String::new();
    for e in &d.entries {
        line.clear();
        for (i, l) in e.labels.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{l}");
        }
        for (f, v) in e.features.iter() {
            let _ = write!(line, " {f}:{v}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Min, quartiles, max and mean of a list of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    #[serde(rename = "min")]
    pub minimum: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    #[serde(rename = "max")]
    pub maximum: f64,
    #[serde(rename = "avg")]
    pub average: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (position `(n - 1) p`).
fn quantile_sorted(sorted: &[u64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let a = sorted[lo] as f64;
    let b = sorted[hi] as f64;
    a + (h - lo as f64) * (b - a)
}

pub fn summarize(values: &[u64]) -> Result<FiveNumberSummary, Error> {
    if values.is_empty() {
        return Err(Error::Empty("summarize needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let sum: f64 = sorted.iter().map(|&v| v as f64).sum();
    Ok(FiveNumberSummary {
        minimum: sorted[0] as f64,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        maximum: sorted[sorted.len() - 1] as f64,
        average: sum / sorted.len() as f64,
    })
}

/// The four per-dataset summaries. Occurrence summaries count only labels or
/// features seen at least once, so they are absent when nothing was seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub label_occurrences: Option<FiveNumberSummary>,
    pub labels_per_entry: FiveNumberSummary,
    pub feature_activations: FiveNumberSummary,
    pub feature_occurrences: Option<FiveNumberSummary>,
}

impl DatasetStatistics {
    /// Aligned text table, one row per statistic.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "statistic", "min", "q1", "median", "q3", "max", "avg"
        );
        let rows = [
            ("label occurrences", self.label_occurrences.as_ref()),
            ("labels per entry", Some(&self.labels_per_entry)),
            ("feature activations", Some(&self.feature_activations)),
            ("feature occurrences", self.feature_occurrences.as_ref()),
        ];
        for (name, summary) in rows {
            match summary {
                Some(f) => {
                    let _ = writeln!(
                        s,
                        "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10.2}",
                        name, f.minimum, f.q1, f.median, f.q3, f.maximum, f.average
                    );
                }
                None => {
                    let _ = writeln!(s, "{name:<22} {:>10}", "-");
                }
            }
        }
        s
    }
}

fn nonzero_counts(counts: Vec<u64>) -> Option<FiveNumberSummary> {
    let seen: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    summarize(&seen).ok()
}

pub fn dataset_statistics(d: &Dataset) -> Result<DatasetStatistics, Error> {
    if d.entries.is_empty() {
        return Err(Error::Empty("dataset has no entries"));
    }
    let mut label_counts = vec![0u64; d.num_labels];
    let mut feature_counts = vec![0u64; d.num_features];
    let mut per_entry_labels = Vec::with_capacity(d.entries.len());
    let mut per_entry_features = Vec::with_capacity(d.entries.len());
    for e in &d.entries {
        per_entry_labels.push(e.labels.len() as u64);
        per_entry_features.push(e.features.nnz() as u64);
        for l in e.labels.iter() {
            label_counts[l as usize] += 1;
        }
        for &f in e.features.ids() {
            feature_counts[f as usize] += 1;
        }
    }
    Ok(DatasetStatistics {
        label_occurrences: nonzero_counts(label_counts),
        labels_per_entry: summarize(&per_entry_labels)?,
        feature_activations: summarize(&per_entry_features)?,
        feature_occurrences: nonzero_counts(feature_counts),
    })
}
