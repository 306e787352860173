//! Inverted index over training feature vectors.
//!
//! Postings are stored in CSR form: `offsets[f]..offsets[f + 1]` slices
//! `entry_ids` and `values` for feature `f`, ascending by entry ID.
//!
//! # On-disk layout (version 1, little-endian)
//!
//! | field                     | type                    |
//! |---------------------------|-------------------------|
//! | magic                     | `b"SWNN"`               |
//! | version                   | `u32` = 1               |
//! | num_entries, num_features, num_labels | `u64` x 3   |
//! | norms                     | `f64` x num_entries     |
//! | support_sizes             | `u32` x num_entries     |
//! | label_offsets             | `u64` x (num_entries+1) |
//! | label_ids                 | `u32` x `label_offsets[n]`|
//! | posting_offsets           | `u64` x (num_features+1)|
//! | posting_entry_ids         | `u32` x nnz             |
//! | posting_values            | `f64` x nnz             |

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::{Dataset, LabelId, LabelSet};
use crate::error::IndexFormatError;
use crate::sparse::{norm2, sim_from_parts, SparseVector};

pub type EntryId = u32;

const MAGIC: &[u8; 4] = b"SWNN";
const VERSION: u32 = 1;

/// Which query support size enters the Jaccard factor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SupportMode {
    /// All non-zero query features, including ones never seen in training.
    #[default]
    Full,
    /// Only query features below the index's feature dimension.
    InVocabulary,
}

/// One training entry sharing at least one feature with the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub entry_id: EntryId,
    pub dot: f64,
    pub intersection: u32,
    pub sim: f64,
}

/// Work counters for one or more candidate-generation passes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreStats {
    /// Posting entries read.
    pub postings_visited: u64,
    /// Query features at or beyond the index dimension.
    pub unseen_features: u64,
    /// Distinct entries touched before the `sim > 0` filter.
    pub entries_touched: u64,
}

impl ScoreStats {
    pub fn add(&mut self, other: &ScoreStats) {
        self.postings_visited += other.postings_visited;
        self.unseen_features += other.unseen_features;
        self.entries_touched += other.entries_touched;
    }
}

/// Per-query accumulation buffers. Reusable across queries on the same index.
#[derive(Debug, Clone)]
pub struct Scratch {
    dots: Vec<f64>,
    common: Vec<u32>,
    touched: Vec<EntryId>,
}

impl Scratch {
    pub fn new(num_entries: usize) -> Self {
        Scratch {
            dots: vec![0.0; num_entries],
            common: vec![0; num_entries],
            touched: Vec::new(),
        }
    }

    fn fit(&mut self, num_entries: usize) {
        if self.dots.len() != num_entries {
            *self = Scratch::new(num_entries);
        }
    }
}

/// Immutable feature -> (entry, value) index with per-entry norms,
/// support sizes and label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingIndex {
    num_features: usize,
    num_labels: usize,
    posting_offsets: Vec<u64>,
    posting_entries: Vec<EntryId>,
    posting_values: Vec<f64>,
    norms: Vec<f64>,
    support_sizes: Vec<u32>,
    label_sets: Vec<LabelSet>,
}

impl TrainingIndex {
    pub fn build(d: &Dataset) -> Self {
        let n = d.num_entries();
        let mut counts = vec![0u64; d.num_features + 1];
        for x in d.features() {
            for &f in x.ids() {
                counts[f as usize + 1] += 1;
            }
        }
        for f in 0..d.num_features {
            counts[f + 1] += counts[f];
        }
        let offsets = counts;
        let nnz = offsets[d.num_features] as usize;
        let mut cursor: Vec<u64> = offsets[..d.num_features].to_vec();
        let mut posting_entries = vec![0; nnz];
        let mut posting_values = vec![0.0; nnz];
        let mut norms = Vec::with_capacity(n);
        let mut support_sizes = Vec::with_capacity(n);
        for (i, x) in d.features().enumerate() {
            for (f, v) in x.iter() {
                let slot = cursor[f as usize] as usize;
                posting_entries[slot] = i as EntryId;
                posting_values[slot] = v;
                cursor[f as usize] += 1;
            }
            norms.push(norm2(x));
            support_sizes.push(x.nnz() as u32);
        }
        TrainingIndex {
            num_features: d.num_features,
            num_labels: d.num_labels,
            posting_offsets: offsets,
            posting_entries,
            posting_values,
            norms,
            support_sizes,
            label_sets: d.labels().cloned().collect(),
        }
    }

    pub fn num_entries(&self) -> usize {
        self.norms.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Total number of stored postings.
    pub fn nnz(&self) -> usize {
        self.posting_entries.len()
    }

    pub fn postings(&self, feature: u32) -> (&[EntryId], &[f64]) {
        let f = feature as usize;
        if f >= self.num_features {
            return (&[], &[]);
        }
        let (a, b) = (
            self.posting_offsets[f] as usize,
            self.posting_offsets[f + 1] as usize,
        );
        (&self.posting_entries[a..b], &self.posting_values[a..b])
    }

    pub fn norm(&self, entry: EntryId) -> f64 {
        self.norms[entry as usize]
    }

    pub fn support_size(&self, entry: EntryId) -> u32 {
        self.support_sizes[entry as usize]
    }

    pub fn labels(&self, entry: EntryId) -> &LabelSet {
        &self.label_sets[entry as usize]
    }

    /// Labels ordered by training frequency (descending), ties by label ID.
    pub fn labels_by_frequency(&self) -> Vec<(LabelId, u64)> {
        let mut counts = vec![0u64; self.num_labels];
        for ls in &self.label_sets {
            for l in ls.iter() {
                counts[l as usize] += 1;
            }
        }
        let mut out: Vec<(LabelId, u64)> = counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(l, c)| (l as LabelId, c))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Mean labels per training entry.
    pub fn mean_labels_per_entry(&self) -> f64 {
        if self.label_sets.is_empty() {
            return 0.0;
        }
        self.label_sets.iter().map(LabelSet::len).sum::<usize>() as f64
            / self.label_sets.len() as f64
    }

    /// Every training entry with positive similarity to `x`, in unspecified order.
    pub fn score_candidates(&self, x: &SparseVector, beta: u32) -> Vec<CandidateScore> {
        let mut scratch = Scratch::new(self.num_entries());
        let mut stats = ScoreStats::default();
        self.score_candidates_with(x, beta, SupportMode::Full, &mut scratch, &mut stats)
    }

    /// Same as [`score_candidates`](Self::score_candidates) with caller-owned
    /// scratch and work counters.
    pub fn score_candidates_with(
        &self,
        x: &SparseVector,
        beta: u32,
        mode: SupportMode,
        scratch: &mut Scratch,
        stats: &mut ScoreStats,
    ) -> Vec<CandidateScore> {
        let query_norm = norm2(x);
        let unseen = x
            .ids()
            .iter()
            .filter(|&&f| f as usize >= self.num_features)
            .count();
        stats.unseen_features += unseen as u64;
        if query_norm == 0.0 {
            return Vec::new();
        }
        let query_size = match mode {
            SupportMode::Full => x.nnz(),
            SupportMode::InVocabulary => x.nnz() - unseen,
        };

        scratch.fit(self.num_entries());
        for (f, qv) in x.iter() {
            let (entries, values) = self.postings(f);
            stats.postings_visited += entries.len() as u64;
            for (&e, &v) in entries.iter().zip(values) {
                let slot = e as usize;
                if scratch.common[slot] == 0 {
                    scratch.touched.push(e);
                }
                scratch.dots[slot] += qv * v;
                scratch.common[slot] += 1;
            }
        }
        stats.entries_touched += scratch.touched.len() as u64;

        let mut out = Vec::with_capacity(scratch.touched.len());
        for &e in &scratch.touched {
            let slot = e as usize;
            let dot = scratch.dots[slot];
            let common = scratch.common[slot];
            scratch.dots[slot] = 0.0;
            scratch.common[slot] = 0;
            let sim = sim_from_parts(
                dot,
                common as usize,
                query_size,
                self.support_sizes[slot] as usize,
                query_norm,
                self.norms[slot],
                beta,
            );
            if sim > 0.0 {
                out.push(CandidateScore {
                    entry_id: e,
                    dot,
                    intersection: common,
                    sim,
                });
            }
        }
        scratch.touched.clear();
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), IndexFormatError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.num_entries() as u64)?;
        w.write_u64::<LittleEndian>(self.num_features as u64)?;
        w.write_u64::<LittleEndian>(self.num_labels as u64)?;
        for &v in &self.norms {
            w.write_f64::<LittleEndian>(v)?;
        }
        for &s in &self.support_sizes {
            w.write_u32::<LittleEndian>(s)?;
        }
        let mut off = 0u64;
        w.write_u64::<LittleEndian>(off)?;
        for ls in &self.label_sets {
            off += ls.len() as u64;
            w.write_u64::<LittleEndian>(off)?;
        }
        for ls in &self.label_sets {
            for l in ls.iter() {
                w.write_u32::<LittleEndian>(l)?;
            }
        }
        for &o in &self.posting_offsets {
            w.write_u64::<LittleEndian>(o)?;
        }
        for &e in &self.posting_entries {
            w.write_u32::<LittleEndian>(e)?;
        }
        for &v in &self.posting_values {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexFormatError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexFormatError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(IndexFormatError::UnsupportedVersion(version));
        }
        let n = read_len(&mut r)?;
        let num_features = read_len(&mut r)?;
        let num_labels = read_len(&mut r)?;

        let norms = read_f64s(&mut r, n)?;
        let support_sizes = read_u32s(&mut r, n)?;
        let label_offsets = read_offsets(&mut r, n)?;
        let label_ids = read_u32s(&mut r, label_offsets[n] as usize)?;
        let mut label_sets = Vec::with_capacity(n);
        for w in label_offsets.windows(2) {
            let ids = &label_ids[w[0] as usize..w[1] as usize];
            if ids.iter().any(|&l| l as usize >= num_labels) || !ids.windows(2).all(|p| p[0] < p[1])
            {
                return Err(corrupt("label set out of range or unsorted"));
            }
            label_sets.push(LabelSet::new(ids.to_vec()));
        }
        let posting_offsets = read_offsets(&mut r, num_features)?;
        let nnz = posting_offsets[num_features] as usize;
        let posting_entries = read_u32s(&mut r, nnz)?;
        let posting_values = read_f64s(&mut r, nnz)?;

        if posting_entries.iter().any(|&e| e as usize >= n) {
            return Err(corrupt("posting entry id out of range"));
        }
        let total_support: u64 = support_sizes.iter().map(|&s| s as u64).sum();
        if total_support != nnz as u64 {
            return Err(corrupt("support sizes disagree with posting count"));
        }
        Ok(TrainingIndex {
            num_features,
            num_labels,
            posting_offsets,
            posting_entries,
            posting_values,
            norms,
            support_sizes,
            label_sets,
        })
    }
}

fn corrupt(msg: &str) -> IndexFormatError {
    IndexFormatError::Corrupt(msg.to_owned())
}

fn read_len<R: Read>(r: &mut R) -> Result<usize, IndexFormatError> {
    let v = r.read_u64::<LittleEndian>()?;
    usize::try_from(v).map_err(|_| corrupt("length does not fit in memory"))
}

// Reads are chunked so a corrupt length fails at EOF instead of allocating it all.
const CHUNK: usize = 1 << 16;

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, IndexFormatError> {
    let mut out = Vec::with_capacity(n.min(CHUNK));
    let mut buf = vec![0.0; CHUNK];
    let mut left = n;
    while left > 0 {
        let k = left.min(CHUNK);
        r.read_f64_into::<LittleEndian>(&mut buf[..k])?;
        out.extend_from_slice(&buf[..k]);
        left -= k;
    }
    Ok(out)
}

fn read_u32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<u32>, IndexFormatError> {
    let mut out = Vec::with_capacity(n.min(CHUNK));
    let mut buf = vec![0u32; CHUNK];
    let mut left = n;
    while left > 0 {
        let k = left.min(CHUNK);
        r.read_u32_into::<LittleEndian>(&mut buf[..k])?;
        out.extend_from_slice(&buf[..k]);
        left -= k;
    }
    Ok(out)
}

/// Reads `len + 1` monotone offsets starting at zero.
fn read_offsets<R: Read>(r: &mut R, len: usize) -> Result<Vec<u64>, IndexFormatError> {
    let mut out = Vec::with_capacity((len + 1).min(CHUNK));
    let mut buf = vec![0u64; CHUNK];
    let mut left = len + 1;
    while left > 0 {
        let k = left.min(CHUNK);
        r.read_u64_into::<LittleEndian>(&mut buf[..k])?;
        out.extend_from_slice(&buf[..k]);
        left -= k;
    }
    if out[0] != 0 || !out.windows(2).all(|w| w[0] <= w[1]) {
        return Err(corrupt("offsets not monotone"));
    }
    Ok(out)
}
