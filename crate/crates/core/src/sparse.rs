//! Sparse feature vectors and the similarity primitives built on them.
//!
//! Every routine walks the two supports with a sorted merge, so the cost is
//! `O(|Supp(x)| + |Supp(y)|)` regardless of the declared dimension.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type FeatureId = u32;

/// Default upper bound on the number of vectors accepted by [`gram_min_eigenvalue`].
pub const GRAM_CAP: usize = 64;

/// A sparse vector stored as parallel arrays of strictly ascending feature
/// IDs and their non-zero values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    ids: Vec<FeatureId>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a vector from `(feature, value)` pairs that are already in
    /// strictly ascending feature order. Zero values are dropped.
    pub fn new(entries: impl IntoIterator<Item = (FeatureId, f64)>) -> Result<Self, Error> {
        let mut out = SparseVector::default();
        for (id, value) in entries {
            if !value.is_finite() {
                return Err(Error::InvalidVector(format!(
                    "non-finite value {value} at feature {id}"
                )));
            }
            if let Some(&last) = out.ids.last() {
                if id <= last {
                    return Err(Error::InvalidVector(format!(
                        "feature {id} follows {last}; ids must be strictly ascending"
                    )));
                }
            }
            if value != 0.0 {
                out.ids.push(id);
                out.values.push(value);
            }
        }
        Ok(out)
    }

    /// Sorts the pairs first; duplicate feature IDs are still an error.
    pub fn from_unsorted(mut entries: Vec<(FeatureId, f64)>) -> Result<Self, Error> {
        entries.sort_by_key(|&(id, _)| id);
        Self::new(entries)
    }

    /// Support size `|Supp(x)|`.
    pub fn nnz(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.ids.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest feature ID plus one, or 0 for the empty vector.
    pub fn dim_hint(&self) -> usize {
        self.ids.last().map_or(0, |&id| id as usize + 1)
    }

    /// Multiplies every value by `c`. Scaling by zero yields the empty vector.
    pub fn scaled(&self, c: f64) -> SparseVector {
        if c == 0.0 {
            return SparseVector::empty();
        }
        SparseVector {
            ids: self.ids.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Neighborhood size, vote exponent, Jaccard exponent and output length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Neighborhood size S.
    pub s: usize,
    /// Vote-weight exponent; neighbors vote with `sim^alpha`.
    pub alpha: f64,
    /// Jaccard exponent. Integral so that the similarity stays a kernel.
    pub beta: u32,
    /// Number of labels returned per query.
    pub top_k: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            s: 20,
            alpha: 1.0,
            beta: 1,
            top_k: 5,
        }
    }
}

impl HyperParams {
    pub fn new(s: usize, alpha: f64, beta: u32, top_k: usize) -> Result<Self, Error> {
        let hp = HyperParams {
            s,
            alpha,
            beta,
            top_k,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.s == 0 {
            return Err(Error::InvalidHyperParams("S must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidHyperParams(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidHyperParams("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Inner product and support intersection size from a single merge pass.
pub(crate) fn merge_dot(x: &SparseVector, y: &SparseVector) -> (f64, usize) {
    let (mut i, mut j) = (0, 0);
    let mut dot = 0.0;
    let mut common = 0;
    while i < x.ids.len() && j < y.ids.len() {
        match x.ids[i].cmp(&y.ids[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += x.values[i] * y.values[j];
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot, common)
}

pub fn dot(x: &SparseVector, y: &SparseVector) -> f64 {
    merge_dot(x, y).0
}

pub fn norm2(x: &SparseVector) -> f64 {
    x.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(x: &SparseVector, y: &SparseVector) -> f64 {
    let (nx, ny) = (norm2(x), norm2(y));
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    dot(x, y) / (nx * ny)
}

/// Jaccard similarity of the two supports. Two empty supports give 0.
pub fn jaccard(x: &SparseVector, y: &SparseVector) -> f64 {
    let (_, common) = merge_dot(x, y);
    jaccard_from_counts(common, x.nnz(), y.nnz())
}

pub(crate) fn jaccard_from_counts(common: usize, size_x: usize, size_y: usize) -> f64 {
    let union = size_x + size_y - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

/// Combines precomputed pieces into `J^beta * dot / (|x| |y|)`.
///
/// Shared by the merge path and the inverted-index path so both produce
/// bit-identical similarities for the same inputs.
#[inline]
pub(crate) fn sim_from_parts(
    dot: f64,
    common: usize,
    size_x: usize,
    size_y: usize,
    norm_x: f64,
    norm_y: f64,
    beta: u32,
) -> f64 {
    if norm_x == 0.0 || norm_y == 0.0 {
        return 0.0;
    }
    let cos = dot / (norm_x * norm_y);
    if beta == 0 {
        return cos;
    }
    jaccard_from_counts(common, size_x, size_y).powi(beta as i32) * cos
}

/// Jaccard-weighted cosine similarity `J(x, y)^beta * cos(x, y)`.
pub fn sim(x: &SparseVector, y: &SparseVector, beta: u32) -> f64 {
    let (d, common) = merge_dot(x, y);
    sim_from_parts(d, common, x.nnz(), y.nnz(), norm2(x), norm2(y), beta)
}

/// Smallest eigenvalue of the Gram matrix `G[i][j] = sim(v_i, v_j, beta)`.
pub fn gram_min_eigenvalue(vectors: &[SparseVector], beta: u32) -> Result<f64, Error> {
    gram_min_eigenvalue_capped(vectors, beta, GRAM_CAP)
}

pub fn gram_min_eigenvalue_capped(
    vectors: &[SparseVector],
    beta: u32,
    cap: usize,
) -> Result<f64, Error> {
    let n = vectors.len();
    if n == 0 || n > cap {
        return Err(Error::GramSize { n, cap });
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sim(&vectors[i], &vectors[j], beta);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenNoConvergence)?;
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(ids: &[u32]) -> SparseVector {
        SparseVector::new(ids.iter().map(|&i| (i, 1.0))).unwrap()
    }

    fn v(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn construction_rejects_unsorted_and_duplicates() {
        assert!(SparseVector::new([(2, 1.0), (1, 1.0)]).is_err());
        assert!(SparseVector::new([(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::from_unsorted(vec![(3, 1.0), (3, 1.0)]).is_err());
        assert!(SparseVector::new([(1, f64::NAN)]).is_err());
        let s = SparseVector::from_unsorted(vec![(5, 1.0), (2, 0.0), (1, 3.0)]).unwrap();
        assert_eq!(s.ids(), &[1, 5]);
        assert_eq!(s.nnz(), 2);
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&SparseVector::empty(), &v(&[(1, 5.0)])), 0.0);
        assert_eq!(dot(&ones(&[1, 2, 4]), &ones(&[1, 2, 4, 5, 8])), 3.0);
        assert_eq!(dot(&v(&[(3, 2.0)]), &v(&[(3, 0.5)])), 1.0);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm2(&SparseVector::empty()), 0.0);
        assert_eq!(norm2(&v(&[(1, 3.0), (7, 4.0)])), 5.0);
        assert!((norm2(&ones(&[1, 2, 4])) - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn jaccard_examples() {
        assert!((jaccard(&ones(&[1, 2, 4]), &ones(&[1, 2, 4, 5, 8])) - 0.6).abs() < 1e-15);
        assert_eq!(jaccard(&ones(&[3, 9]), &v(&[(3, 2.0), (9, -1.0)])), 1.0);
        assert_eq!(jaccard(&ones(&[1]), &ones(&[2])), 0.0);
        assert_eq!(jaccard(&SparseVector::empty(), &SparseVector::empty()), 0.0);
    }

    #[test]
    fn sim_examples() {
        let x = v(&[(1, 0.3), (6, 2.0), (9, 1.1)]);
        for beta in 0..4 {
            assert!((sim(&x, &x, beta) - 1.0).abs() < 1e-12);
        }
        let a = ones(&[1, 2, 4]);
        let b = ones(&[1, 2, 4, 5, 8]);
        assert!((sim(&a, &b, 1) - 0.464_758).abs() < 1e-6);
        assert!((sim(&a, &b, 0) - 0.774_597).abs() < 1e-6);
        // beta = 0 keeps cosine even for disjoint supports (which is 0 anyway).
        assert_eq!(sim(&ones(&[1]), &ones(&[2]), 0), 0.0);
        assert_eq!(sim(&SparseVector::empty(), &a, 0), 0.0);
    }

    #[test]
    fn gram_examples() {
        let x = v(&[(0, 1.0), (3, 2.5)]);
        assert!((gram_min_eigenvalue(std::slice::from_ref(&x), 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            gram_min_eigenvalue(&[x.clone(), x.clone()], 2)
                .unwrap()
                .abs()
                < 1e-9
        );
        assert_eq!(
            gram_min_eigenvalue(&[], 1),
            Err(Error::GramSize {
                n: 0,
                cap: GRAM_CAP
            })
        );
        let many = vec![x; GRAM_CAP + 1];
        assert!(matches!(
            gram_min_eigenvalue(&many, 0),
            Err(Error::GramSize { .. })
        ));
    }

    #[test]
    fn hyper_params_validation() {
        assert!(HyperParams::new(0, 1.0, 1, 5).is_err());
        assert!(HyperParams::new(1, -0.5, 1, 5).is_err());
        assert!(HyperParams::new(1, f64::NAN, 1, 5).is_err());
        assert!(HyperParams::new(1, 1.0, 1, 0).is_err());
        assert!(HyperParams::new(3, 0.0, 0, 1).is_ok());
    }
}
