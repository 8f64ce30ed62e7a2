//! Observations, labels, weightings and the scoring primitive.
//!
//! Labels are 0-based `usize` values inside the library. The external formats
//! (CSV, JSON, model files) use `1..=|A|`; conversion happens only in `io` and
//! in the report serializers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// A label index in `0..m` for the label set currently in play.
pub type Label = usize;

/// Row-major matrix of observation features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return contract("feature matrix needs at least one row");
        };
        let dim = first.len();
        if dim == 0 {
            return contract("feature matrix needs at least one column");
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return contract(format!("row {i} has {} columns, expected {dim}", row.len()));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return contract(format!("row {i} has a non-finite feature {v}"));
            }
            values.extend_from_slice(row);
        }
        Ok(FeatureMatrix { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &p in indices {
            values.extend_from_slice(self.row(p));
        }
        FeatureMatrix {
            dim: self.dim,
            values,
        }
    }
}

/// Bitwise identity key of a feature row (`-0.0` and `0.0` coincide).
pub(crate) fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter()
        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

/// First pair `(earlier, later)` of identical rows carrying different labels.
pub(crate) fn find_label_conflict(features: &FeatureMatrix, labels: &[Label]) -> Option<(usize, usize)> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (p, row) in features.rows().enumerate() {
        match seen.get(&row_key(row)) {
            Some(&q) if labels[q] != labels[p] => return Some((q, p)),
            Some(_) => {}
            None => {
                seen.insert(row_key(row), p);
            }
        }
    }
    None
}

/// Training observations with their ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: FeatureMatrix,
    labels: Vec<Label>,
    num_labels: usize,
    duplicate_of: Vec<Option<usize>>,
}

impl Dataset {
    /// `labels` are 0-based and must lie in `0..num_labels`.
    pub fn new(features: FeatureMatrix, labels: Vec<Label>, num_labels: usize) -> Result<Self> {
        if num_labels < 2 {
            return contract(format!("need at least 2 labels, got {num_labels}"));
        }
        if labels.len() != features.len() {
            return contract(format!(
                "{} labels for {} observations",
                labels.len(),
                features.len()
            ));
        }
        if let Some((p, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_labels) {
            return contract(format!(
                "observation {p} has label {} outside 1..={num_labels}",
                l + 1
            ));
        }
        if let Some((q, p)) = find_label_conflict(&features, &labels) {
            return contract(format!(
                "observations {q} and {p} have identical features but different labels"
            ));
        }
        let mut first: HashMap<Vec<u64>, usize> = HashMap::new();
        let duplicate_of = features
            .rows()
            .enumerate()
            .map(|(p, row)| {
                let key = row_key(row);
                match first.get(&key) {
                    Some(&q) => Some(q),
                    None => {
                        first.insert(key, p);
                        None
                    }
                }
            })
            .collect();
        Ok(Dataset {
            features,
            labels,
            num_labels,
            duplicate_of,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>, num_labels: usize) -> Result<Self> {
        Dataset::new(FeatureMatrix::from_rows(rows)?, labels, num_labels)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    /// For each row, the index of an earlier identical row if there is one.
    pub fn duplicate_of(&self) -> &[Option<usize>] {
        &self.duplicate_of
    }

    /// Labels in `0..num_labels` that no observation carries.
    pub fn unused_labels(&self) -> Vec<Label> {
        let mut used = vec![false; self.num_labels];
        for &l in &self.labels {
            used[l] = true;
        }
        (0..self.num_labels).filter(|&l| !used[l]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let labels = indices.iter().map(|&p| self.labels[p]).collect();
        Dataset::new(self.features.select(indices), labels, self.num_labels)
    }
}

/// The label set `{0, .., size-1}` of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    size: usize,
}

impl LabelSet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return contract("label set must be nonempty");
        }
        Ok(LabelSet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, label: Label) -> bool {
        label < self.size
    }

    pub fn iter(&self) -> std::ops::Range<Label> {
        0..self.size
    }
}

const DISTRIBUTION_TOL: f64 = 1e-12;

/// A probability weighting of the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return contract("distribution over zero observations");
        }
        Ok(Distribution(vec![1.0 / n as f64; n]))
    }

    /// Validates nonnegativity and unit mass (within 1e-12).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return contract("distribution over zero observations");
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return contract(format!("invalid weight {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return contract(format!("weights sum to {total}, not 1"));
        }
        Ok(Distribution(weights))
    }

    /// Scale nonnegative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return contract(format!("invalid weight {w}"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return contract("weights have zero total mass");
        }
        Ok(Distribution(weights.into_iter().map(|w| w / total).collect()))
    }

    /// Internal constructor for weights already known to be a distribution.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Distribution(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted agreement `sum_p (1[h(p)=y(p)] - 1[h(p)!=y(p)]) d(p)`, in `[-1, 1]`.
pub fn score(h: &[Label], y: &[Label], d: &Distribution) -> Result<f64> {
    if h.len() != y.len() || y.len() != d.len() {
        return contract(format!(
            "length mismatch: hypothesis {}, labels {}, distribution {}",
            h.len(),
            y.len(),
            d.len()
        ));
    }
    Ok(h.iter()
        .zip(y)
        .zip(d.weights())
        .map(|((a, b), w)| if a == b { *w } else { -*w })
        .sum())
}

/// Weighted misclassification mass `sum_{h(p)!=y(p)} d(p)`.
pub fn weighted_error(h: &[Label], y: &[Label], d: &Distribution) -> Result<f64> {
    if h.len() != y.len() || y.len() != d.len() {
        return contract("length mismatch in weighted_error");
    }
    Ok(h.iter()
        .zip(y)
        .zip(d.weights())
        .filter(|((a, b), _)| a != b)
        .map(|(_, w)| *w)
        .sum())
}

/// Score of guessing uniformly among `m` labels: `(2 - m) / m`.
pub fn random_guess_score(m: usize) -> Result<f64> {
    if m < 2 {
        return contract(format!("random-guess score needs m >= 2, got {m}"));
    }
    Ok((2.0 - m as f64) / m as f64)
}

/// Accumulated votes `F` and centred scores `Psi` of one epoch.
///
/// `Psi[p][a] = (m-1) F[p][a] - sum_{a' != a} F[p][a']`, which is maintained
/// incrementally as `sum_s alpha_s (m 1[h_s(p)=a] - 1)`. Rows of `Psi` sum to
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    observations: usize,
    labels: usize,
    rounds: usize,
    f: Vec<f64>,
    psi: Vec<f64>,
}

impl ScoreTable {
    pub fn new(observations: usize, labels: usize) -> Self {
        ScoreTable {
            observations,
            labels,
            rounds: 0,
            f: vec![0.0; observations * labels],
            psi: vec![0.0; observations * labels],
        }
    }

    /// Table of a single unit-weight vote for `h`.
    pub fn unit(h: &[Label], labels: usize) -> Result<Self> {
        let mut t = ScoreTable::new(h.len(), labels);
        t.update(h, 1.0)?;
        Ok(t)
    }

    /// Table with the given `Psi` rows (each must sum to zero); `F` is set
    /// to the nonnegative solution with the smallest entry zero.
    pub fn from_psi_rows(rows: &[&[f64]]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return contract("score table needs at least one row");
        };
        let m = first.len();
        let mut t = ScoreTable::new(rows.len(), m);
        for (p, row) in rows.iter().enumerate() {
            if row.len() != m {
                return contract("ragged score rows");
            }
            let total: f64 = row.iter().sum();
            if total.abs() > 1e-9 {
                return contract(format!("score row {p} sums to {total}, not 0"));
            }
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            for a in 0..m {
                t.f[p * m + a] = (row[a] - lo) / m as f64;
                t.psi[p * m + a] = row[a];
            }
        }
        Ok(t)
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn f_row(&self, p: usize) -> &[f64] {
        &self.f[p * self.labels..(p + 1) * self.labels]
    }

    pub fn psi_row(&self, p: usize) -> &[f64] {
        &self.psi[p * self.labels..(p + 1) * self.labels]
    }

    pub fn psi(&self, p: usize, a: Label) -> f64 {
        self.psi[p * self.labels + a]
    }

    /// Add one round's vote: `F[p][h(p)] += alpha` and
    /// `Psi[p][a] += alpha (m 1[h(p)=a] - 1)`.
    pub fn update(&mut self, h: &[Label], alpha: f64) -> Result<()> {
        if h.len() != self.observations {
            return contract(format!(
                "hypothesis covers {} observations, table has {}",
                h.len(),
                self.observations
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return contract(format!("vote weight must be positive, got {alpha}"));
        }
        let m = self.labels;
        let up = alpha * (m as f64 - 1.0);
        for (p, &label) in h.iter().enumerate() {
            if label >= m {
                return contract(format!("label {label} outside a table of {m} labels"));
            }
            let base = p * m;
            self.f[base + label] += alpha;
            for a in 0..m {
                if a == label {
                    self.psi[base + a] += up;
                } else {
                    self.psi[base + a] -= alpha;
                }
            }
        }
        self.rounds += 1;
        Ok(())
    }

    /// True when every observation has at least one strictly negative `Psi`.
    pub fn every_row_has_negative(&self) -> bool {
        self.psi
            .chunks_exact(self.labels)
            .all(|row| row.iter().any(|v| *v < 0.0))
    }
}

/// Indices attaining the maximum of `values` (exact comparison).
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Distribution {
        Distribution::uniform(n).unwrap()
    }

    #[test]
    fn score_extremes() {
        let y = vec![0, 1, 2, 1];
        let d = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(score(&y, &y, &d).unwrap(), 1.0);
        let wrong = vec![1, 2, 0, 0];
        assert_eq!(score(&wrong, &y, &d).unwrap(), -1.0);
    }

    #[test]
    fn score_ms13_constant() {
        // h1 = 1 everywhere, y = (1, 2): score is 2 d(a) - 1.
        let h = vec![0, 0];
        let y = vec![0, 1];
        for da in [0.0, 0.2, 0.5, 0.9] {
            let d = Distribution::new(vec![da, 1.0 - da]).unwrap();
            let s = score(&h, &y, &d).unwrap();
            assert!((s - (2.0 * da - 1.0)).abs() < 1e-15);
        }
        assert_eq!(score(&h, &y, &uniform(2)).unwrap(), 0.0);
    }

    #[test]
    fn score_length_mismatch() {
        assert!(score(&[0, 1], &[0], &uniform(2)).is_err());
        assert!(score(&[0, 1], &[0, 1], &uniform(3)).is_err());
    }

    #[test]
    fn random_guess_values() {
        assert_eq!(random_guess_score(2).unwrap(), 0.0);
        assert!((random_guess_score(3).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(random_guess_score(4).unwrap(), -0.5);
        assert!(random_guess_score(1).is_err());
        assert!(random_guess_score(0).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        let d = Distribution::normalized(vec![2.0, 6.0]).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn dataset_rejects_conflicting_duplicates() {
        let rows = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        assert!(Dataset::from_rows(&rows, vec![0, 1], 2).is_err());
        let ok = Dataset::from_rows(&rows, vec![1, 1], 2).unwrap();
        assert_eq!(ok.duplicate_of(), &[None, Some(0)]);
    }

    #[test]
    fn dataset_label_range() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(Dataset::from_rows(&rows, vec![0, 2], 2).is_err());
        assert!(Dataset::from_rows(&rows, vec![0, 1], 1).is_err());
        let d = Dataset::from_rows(&rows, vec![0, 2], 4).unwrap();
        assert_eq!(d.unused_labels(), vec![1, 3]);
    }

    #[test]
    fn single_round_psi() {
        let mut t = ScoreTable::new(1, 3);
        t.update(&[1], 0.7).unwrap();
        assert_eq!(t.psi_row(0), &[-0.7, 0.7 * 2.0, -0.7]);
        assert_eq!(t.f_row(0), &[0.0, 0.7, 0.0]);
    }

    #[test]
    fn update_rejects_bad_weight() {
        let mut t = ScoreTable::new(2, 3);
        assert!(t.update(&[0, 1], 0.0).is_err());
        assert!(t.update(&[0, 3], 1.0).is_err());
        assert!(t.update(&[0], 1.0).is_err());
    }
}
