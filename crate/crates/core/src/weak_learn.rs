//! Single-threshold hypotheses: enumeration, optimal choice, relabelling.
//!
//! A stump assigns `above` to observations with `lambda . x >= omega` and
//! `below` to the rest. The pool keeps one representative per distinct
//! realized label vector on the training sample, in canonical order
//! (direction, then threshold ascending, then the `(above, below)` pair in
//! lexicographic order); the first representative wins.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{Distribution, FeatureMatrix, Label};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::io::one_based;

/// The linear functional a stump thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Axis(usize),
    Vector(Vec<f64>),
}

impl Direction {
    pub fn project(&self, x: &[f64]) -> f64 {
        match self {
            Direction::Axis(j) => x[*j],
            Direction::Vector(lambda) => lambda.iter().zip(x).map(|(a, b)| a * b).sum(),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Direction::Axis(j) if *j >= dim => {
                contract(format!("axis {j} out of range for dimension {dim}"))
            }
            Direction::Vector(lambda) if lambda.len() != dim => contract(format!(
                "direction has {} coefficients, data has dimension {dim}",
                lambda.len()
            )),
            Direction::Vector(lambda) if lambda.iter().any(|v| !v.is_finite()) => {
                contract("direction has a non-finite coefficient")
            }
            _ => Ok(()),
        }
    }
}

/// Threshold `omega`, with sentinels standing for minus and plus infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    BelowAll,
    At(f64),
    AboveAll,
}

impl Threshold {
    fn is_above(self, projection: f64) -> bool {
        match self {
            Threshold::BelowAll => true,
            Threshold::At(omega) => projection >= omega,
            Threshold::AboveAll => false,
        }
    }
}

/// A single-threshold classifier in parametric form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub direction: Direction,
    pub threshold: Threshold,
    #[serde(with = "one_based::label")]
    pub above: Label,
    #[serde(with = "one_based::label")]
    pub below: Label,
}

impl Stump {
    pub fn constant(label: Label) -> Self {
        Stump {
            direction: Direction::Axis(0),
            threshold: Threshold::BelowAll,
            above: label,
            below: label,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Label {
        if self.side(x) {
            self.above
        } else {
            self.below
        }
    }

    fn side(&self, x: &[f64]) -> bool {
        match self.threshold {
            Threshold::BelowAll => true,
            Threshold::AboveAll => false,
            t => t.is_above(self.direction.project(x)),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        self.direction.check_dim(dim)
    }
}

/// A hypothesis in parametric form together with its labels on the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRealization {
    pub stump: Stump,
    pub realized: Vec<Label>,
}

impl HypothesisRealization {
    pub fn new(stump: Stump, features: &FeatureMatrix) -> Result<Self> {
        stump.check_dim(features.dim())?;
        let realized = features.rows().map(|x| stump.apply(x)).collect();
        Ok(HypothesisRealization { stump, realized })
    }
}

/// How candidate stumps are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSpec {
    /// Every coordinate axis.
    Axis,
    /// User-supplied directions `lambda`.
    Directions(Vec<Vec<f64>>),
    /// An explicit list of hypotheses; those using labels outside the
    /// current label set are dropped.
    Fixed(Vec<Stump>),
}

#[derive(Debug, Clone)]
struct Split {
    direction: Direction,
    threshold: Threshold,
    side: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    split: usize,
    above: Label,
    below: Label,
}

/// Deduplicated pool of stumps over a fixed sample and label set.
///
/// Entries are stored grouped by split (a direction/threshold pair), so the
/// optimal-hypothesis scan needs one pass over the sample per split.
#[derive(Debug, Clone)]
pub struct StumpPool {
    labels: usize,
    observations: usize,
    splits: Vec<Split>,
    entries: Vec<Entry>,
    groups: Vec<(usize, usize)>,
}

/// Result of the optimal-hypothesis scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestHypothesis {
    /// Position in the pool's canonical order.
    pub index: usize,
    pub edge: f64,
    pub epsilon: f64,
}

/// Split position strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

fn thresholds_for(direction: &Direction, features: &FeatureMatrix) -> Vec<Threshold> {
    let mut values: Vec<f64> = features.rows().map(|x| direction.project(x)).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(Threshold::BelowAll);
    out.extend(values.windows(2).map(|w| Threshold::At(midpoint(w[0], w[1]))));
    out.push(Threshold::AboveAll);
    out
}

impl StumpPool {
    /// Enumerate the pool for `labels` labels over `features`.
    pub fn build(features: &FeatureMatrix, labels: usize, spec: &PoolSpec) -> Result<Self> {
        if labels < 2 {
            return contract(format!("stump pool needs at least 2 labels, got {labels}"));
        }
        if features.is_empty() {
            return contract("stump pool over an empty dataset");
        }
        let mut pool = StumpPool {
            labels,
            observations: features.len(),
            splits: Vec::new(),
            entries: Vec::new(),
            groups: Vec::new(),
        };
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let all_pairs: Vec<(Label, Label)> = (0..labels)
            .flat_map(|a| (0..labels).map(move |b| (a, b)))
            .collect();

        let directions: Vec<Direction> = match spec {
            PoolSpec::Axis => (0..features.dim()).map(Direction::Axis).collect(),
            PoolSpec::Directions(list) => {
                if list.is_empty() {
                    return contract("direction list is empty");
                }
                list.iter().cloned().map(Direction::Vector).collect()
            }
            PoolSpec::Fixed(_) => Vec::new(),
        };
        for direction in directions {
            direction.check_dim(features.dim())?;
            for threshold in thresholds_for(&direction, features) {
                let split = Split {
                    side: features
                        .rows()
                        .map(|x| threshold.is_above(direction.project(x)))
                        .collect(),
                    direction: direction.clone(),
                    threshold,
                };
                pool.push_split(split, &all_pairs, &mut seen);
            }
        }
        if let PoolSpec::Fixed(stumps) = spec {
            for stump in stumps {
                stump.check_dim(features.dim())?;
                if stump.above >= labels || stump.below >= labels {
                    continue;
                }
                let split = Split {
                    side: features.rows().map(|x| stump.side(x)).collect(),
                    direction: stump.direction.clone(),
                    threshold: stump.threshold,
                };
                pool.push_split(split, &[(stump.above, stump.below)], &mut seen);
            }
        }
        if pool.entries.is_empty() {
            return contract(format!("no hypothesis in the pool maps into {labels} labels"));
        }
        Ok(pool)
    }

    fn push_split(&mut self, split: Split, pairs: &[(Label, Label)], seen: &mut HashSet<Vec<u32>>) {
        let index = self.splits.len();
        let start = self.entries.len();
        for &(above, below) in pairs {
            let realized: Vec<u32> = split
                .side
                .iter()
                .map(|&s| if s { above as u32 } else { below as u32 })
                .collect();
            if seen.insert(realized) {
                self.entries.push(Entry {
                    split: index,
                    above,
                    below,
                });
            }
        }
        self.groups.push((start, self.entries.len()));
        self.splits.push(split);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn stump(&self, index: usize) -> Stump {
        let e = self.entries[index];
        let split = &self.splits[e.split];
        Stump {
            direction: split.direction.clone(),
            threshold: split.threshold,
            above: e.above,
            below: e.below,
        }
    }

    pub fn realized(&self, index: usize) -> Vec<Label> {
        let e = self.entries[index];
        self.splits[e.split]
            .side
            .iter()
            .map(|&s| if s { e.above } else { e.below })
            .collect()
    }

    pub fn realization(&self, index: usize) -> HypothesisRealization {
        HypothesisRealization {
            stump: self.stump(index),
            realized: self.realized(index),
        }
    }

    /// All realized vectors in canonical order.
    pub fn realizations(&self) -> Vec<Vec<Label>> {
        (0..self.len()).map(|i| self.realized(i)).collect()
    }

    pub fn contains_realization(&self, realized: &[Label]) -> bool {
        (0..self.len()).any(|i| self.realized(i) == realized)
    }

    /// Optimal hypothesis against `d`: maximal edge, first in canonical order on ties.
    pub fn best_hypothesis(&self, y: &[Label], d: &Distribution, exec: Execution) -> Result<BestHypothesis> {
        if y.len() != self.observations || d.len() != self.observations {
            return contract(format!(
                "pool covers {} observations, got {} labels and {} weights",
                self.observations,
                y.len(),
                d.len()
            ));
        }
        if let Some(l) = y.iter().find(|&&l| l >= self.labels) {
            return contract(format!("target label {} outside 1..={}", l + 1, self.labels));
        }
        let m = self.labels;
        let weights = d.weights();
        let best = exec.min_by_index(self.splits.len(), |g| {
            let (start, end) = self.groups[g];
            if start == end {
                return None;
            }
            let side = &self.splits[g].side;
            let mut above = vec![0.0; m];
            let mut below = vec![0.0; m];
            for p in 0..side.len() {
                if side[p] {
                    above[y[p]] += weights[p];
                } else {
                    below[y[p]] += weights[p];
                }
            }
            let above_total: f64 = above.iter().sum();
            let below_total: f64 = below.iter().sum();
            let mut local: Option<(f64, usize)> = None;
            for (i, e) in self.entries[start..end].iter().enumerate() {
                let eps = (above_total - above[e.above]) + (below_total - below[e.below]);
                if local.is_none_or(|(b, _)| eps < b) {
                    local = Some((eps, start + i));
                }
            }
            local
        });
        let (_, (epsilon, index)) =
            best.ok_or_else(|| BoostError::Contract("empty hypothesis pool".into()))?;
        Ok(BestHypothesis {
            index,
            edge: 1.0 - 2.0 * epsilon,
            epsilon,
        })
    }
}

/// Check that `pi` is a bijection on `0..pi.len()`.
pub fn check_permutation(pi: &[Label]) -> Result<()> {
    let mut hit = vec![false; pi.len()];
    for &v in pi {
        if v >= pi.len() || hit[v] {
            return contract(format!("{pi:?} is not a bijection on {} labels", pi.len()));
        }
        hit[v] = true;
    }
    Ok(())
}

/// Relabel a hypothesis through the bijection `pi` (given as `pi[a]`).
pub fn permute_realization(h: &HypothesisRealization, pi: &[Label]) -> Result<HypothesisRealization> {
    check_permutation(pi)?;
    let m = pi.len();
    if h.stump.above >= m || h.stump.below >= m || h.realized.iter().any(|&l| l >= m) {
        return contract(format!("hypothesis uses labels outside the permuted set of {m}"));
    }
    Ok(HypothesisRealization {
        stump: Stump {
            above: pi[h.stump.above],
            below: pi[h.stump.below],
            ..h.stump.clone()
        },
        realized: h.realized.iter().map(|&l| pi[l]).collect(),
    })
}
