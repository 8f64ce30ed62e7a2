//! Epoch-wise label elimination and the composed final hypothesis.
//!
//! After each epoch every observation nominates the labels with negative
//! `Psi` (its candidates). The same number `N_i` of labels, the minimum
//! candidate count, is removed for every observation by taking the last
//! `N_i` candidates in index order. Survivors are re-indexed in increasing
//! order, so the next epoch again works on `0..|A_{i+1}|`. Training stops
//! when a single label survives; composing the re-indexings outward gives
//! the prediction in the original alphabet.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::{row_key, Dataset, FeatureMatrix, Label, ScoreTable};
use crate::epoch::{run_epoch_observed, EpochConfig, EpochRecord, RoundTrace};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::io::one_based;
use crate::weak_learn::{PoolSpec, StumpPool};

/// Labels with strictly negative `Psi` for observation `p`, ascending.
pub fn candidates(psi: &ScoreTable, p: usize) -> Vec<Label> {
    psi.psi_row(p)
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(a, _)| a)
        .collect()
}

/// `N_i = min_p |B_i(p)|`; every candidate set must be nonempty.
pub fn elimination_count(candidate_sets: &[Vec<Label>]) -> Result<usize> {
    if candidate_sets.is_empty() {
        return contract("no observations to eliminate over");
    }
    if let Some(p) = candidate_sets.iter().position(|b| b.is_empty()) {
        return Err(BoostError::Numeric(format!(
            "observation {p} has no negative score at the end of the epoch"
        )));
    }
    Ok(candidate_sets.iter().map(Vec::len).min().unwrap_or(0))
}

/// The last `n` elements of the ascending candidate set.
pub fn select_eliminated(candidates: &[Label], n: usize) -> Result<Vec<Label>> {
    if n > candidates.len() {
        return contract(format!(
            "cannot eliminate {n} of {} candidates",
            candidates.len()
        ));
    }
    Ok(candidates[candidates.len() - n..].to_vec())
}

/// Increasing bijection from `0..m-|eliminated|` onto the surviving labels,
/// as the vector of its values.
pub fn build_permutation(m: usize, eliminated: &[Label]) -> Result<Vec<Label>> {
    if let Some(a) = eliminated.iter().find(|&&a| a >= m) {
        return contract(format!("eliminated label {} outside 1..={m}", a + 1));
    }
    let mut gone = vec![false; m];
    for &a in eliminated {
        gone[a] = true;
    }
    Ok((0..m).filter(|&a| !gone[a]).collect())
}

/// Next-epoch targets `pi^{-1}(y_i(p))`.
///
/// Where `y_i(p)` was eliminated, `p` is reported as having lost its truth
/// and receives the surviving label of largest `Psi` (smallest index on
/// ties) as a surrogate target.
pub fn relabel(
    y: &[Label],
    psi: &ScoreTable,
    survivors: &[Vec<Label>],
) -> Result<(Vec<Label>, Vec<usize>)> {
    if y.len() != survivors.len() || y.len() != psi.observations() {
        return contract("length mismatch in relabel");
    }
    let mut next = Vec::with_capacity(y.len());
    let mut lost = Vec::new();
    for (p, (&target, pi)) in y.iter().zip(survivors).enumerate() {
        match pi.iter().position(|&a| a == target) {
            Some(j) => next.push(j),
            None => {
                lost.push(p);
                let row = psi.psi_row(p);
                let mut best = 0;
                for (j, &a) in pi.iter().enumerate() {
                    if row[a] > row[pi[best]] {
                        best = j;
                    }
                }
                next.push(best);
            }
        }
    }
    Ok((next, lost))
}

/// Bookkeeping of one elimination between epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    #[serde(with = "one_based::label_sets")]
    pub candidates: Vec<Vec<Label>>,
    /// `N_i`.
    pub count: usize,
    #[serde(with = "one_based::label_sets")]
    pub eliminated: Vec<Vec<Label>>,
    /// Per observation, `pi(j)` for `j` in the next label set.
    #[serde(with = "one_based::label_sets")]
    pub survivors: Vec<Vec<Label>>,
    pub next_label_size: usize,
    /// 0-based rows whose target was eliminated in this step for the first time.
    pub truth_lost: Vec<usize>,
}

/// Build the elimination step from a finished epoch's scores.
pub fn eliminate(psi: &ScoreTable) -> Result<EliminationStep> {
    let n = psi.observations();
    let m = psi.labels();
    let candidate_sets: Vec<Vec<Label>> = (0..n).map(|p| candidates(psi, p)).collect();
    let count = elimination_count(&candidate_sets)?;
    let eliminated = candidate_sets
        .iter()
        .map(|b| select_eliminated(b, count))
        .collect::<Result<Vec<_>>>()?;
    let survivors = eliminated
        .iter()
        .map(|e| build_permutation(m, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(EliminationStep {
        candidates: candidate_sets,
        count,
        eliminated,
        survivors,
        next_label_size: m - count,
        truth_lost: Vec::new(),
    })
}

/// Labels a fresh point loses in an epoch that eliminated `n` labels.
///
/// The last `n` negative-score labels by index, as for training points.
/// When fewer than `n` scores are negative, all of them go, and the rest
/// are taken by smallest score with the larger index first on ties.
pub fn out_of_sample_eliminated(psi: &[f64], n: usize) -> Vec<bool> {
    let mut gone = vec![false; psi.len()];
    let negative: Vec<Label> = (0..psi.len()).filter(|&a| psi[a] < 0.0).collect();
    if negative.len() >= n {
        for &a in &negative[negative.len() - n..] {
            gone[a] = true;
        }
        return gone;
    }
    for &a in &negative {
        gone[a] = true;
    }
    let mut rest: Vec<Label> = (0..psi.len()).filter(|&a| !gone[a]).collect();
    rest.sort_by(|&a, &b| psi[a].total_cmp(&psi[b]).then(b.cmp(&a)));
    for &a in &rest[..n - negative.len()] {
        gone[a] = true;
    }
    gone
}

/// Training parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Minimum epoch length `K`.
    pub min_rounds: usize,
    pub round_cap: Option<usize>,
    pub pool: PoolSpec,
    pub exec: Execution,
}

impl TrainConfig {
    pub fn new(min_rounds: usize) -> Self {
        TrainConfig {
            min_rounds,
            round_cap: None,
            pool: PoolSpec::Axis,
            exec: Execution::default(),
        }
    }

    fn epoch_config(&self) -> EpochConfig {
        EpochConfig {
            min_rounds: self.min_rounds,
            round_cap: self.round_cap,
            exec: self.exec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochModel {
    pub record: EpochRecord,
    pub step: EliminationStep,
}

/// A trained eliminating ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub num_labels: usize,
    pub dim: usize,
    pub min_rounds: usize,
    pub epochs: Vec<EpochModel>,
    /// `|A_1| > |A_2| > ...`, one entry per epoch.
    pub label_sizes: Vec<usize>,
    pub training_features: FeatureMatrix,
    #[serde(with = "one_based::labels")]
    pub training_labels: Vec<Label>,
    #[serde(with = "one_based::labels")]
    pub training_predictions: Vec<Label>,
    /// 0-based rows whose true label was eliminated, ascending.
    pub truth_lost: Vec<usize>,
    #[serde(skip)]
    lookup: OnceLock<HashMap<Vec<u64>, usize>>,
}

impl TrainedModel {
    /// Number of epochs `I`.
    pub fn epoch_count(&self) -> usize {
        self.epochs.len()
    }

    pub fn training_error(&self) -> f64 {
        self.truth_lost.len() as f64 / self.training_labels.len() as f64
    }

    fn training_row(&self, x: &[f64]) -> Option<usize> {
        let lookup = self.lookup.get_or_init(|| {
            let mut map = HashMap::new();
            for (p, row) in self.training_features.rows().enumerate() {
                map.entry(row_key(row)).or_insert(p);
            }
            map
        });
        lookup.get(&row_key(x)).copied()
    }

    /// Predicted label (0-based) for a feature vector.
    ///
    /// Training observations return their stored training prediction. Other
    /// points run each epoch's stored hypotheses and eliminate `N_i` labels
    /// as in training (see [`out_of_sample_eliminated`]), then re-index the
    /// survivors.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim {
            return contract(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.dim
            ));
        }
        if let Some(p) = self.training_row(x) {
            return Ok(self.training_predictions[p]);
        }
        let mut to_original: Vec<Label> = (0..self.num_labels).collect();
        for epoch in &self.epochs {
            let psi = epoch.record.scores_at(x);
            let gone = out_of_sample_eliminated(&psi, epoch.step.count);
            to_original = (0..psi.len())
                .filter(|&a| !gone[a])
                .map(|a| to_original[a])
                .collect();
        }
        match to_original.as_slice() {
            [label] => Ok(*label),
            other => Err(BoostError::Model(format!(
                "{} labels survive all epochs",
                other.len()
            ))),
        }
    }

    pub fn predict_all(&self, features: &FeatureMatrix) -> Result<Vec<Label>> {
        features.rows().map(|x| self.predict(x)).collect()
    }

    /// Fraction of `data` misclassified.
    pub fn error_on(&self, data: &Dataset) -> Result<f64> {
        let predictions = self.predict_all(data.features())?;
        let wrong = predictions
            .iter()
            .zip(data.labels())
            .filter(|(a, b)| a != b)
            .count();
        Ok(wrong as f64 / data.len() as f64)
    }
}

/// Train the eliminating ensemble.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    train_observed(data, config, &mut |_, _| {})
}

/// [`train`] with an observer called after every round, with the 1-based
/// epoch index.
pub fn train_observed(
    data: &Dataset,
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, &RoundTrace<'_>),
) -> Result<TrainedModel> {
    if config.min_rounds == 0 {
        return contract("minimum epoch length K must be at least 1");
    }
    let n = data.len();
    let features = data.features();
    let epoch_config = config.epoch_config();
    let mut m = data.num_labels();
    let mut y: Vec<Label> = data.labels().to_vec();
    let mut lost = vec![false; n];
    let mut epochs: Vec<EpochModel> = Vec::new();
    let mut label_sizes = Vec::new();

    loop {
        let index = epochs.len() + 1;
        let pool = StumpPool::build(features, m, &config.pool)?;
        let record = run_epoch_observed(features, &y, m, &pool, &epoch_config, &mut |t| {
            observer(index, t)
        })
        .map_err(|e| e.in_epoch(index))?;
        let mut step = eliminate(&record.psi).map_err(|e| e.in_epoch(index))?;
        let (next_y, lost_now) = relabel(&y, &record.psi, &step.survivors)?;
        step.truth_lost = lost_now.into_iter().filter(|&p| !lost[p]).collect();
        for &p in &step.truth_lost {
            lost[p] = true;
        }
        label_sizes.push(m);
        let next_size = step.next_label_size;
        epochs.push(EpochModel { record, step });
        if next_size == 1 {
            break;
        }
        m = next_size;
        y = next_y;
    }

    let training_predictions = (0..n)
        .map(|p| {
            epochs
                .iter()
                .rev()
                .fold(0, |label, e| e.step.survivors[p][label])
        })
        .collect();
    Ok(TrainedModel {
        num_labels: data.num_labels(),
        dim: data.dim(),
        min_rounds: config.min_rounds,
        epochs,
        label_sizes,
        training_features: features.clone(),
        training_labels: data.labels().to_vec(),
        training_predictions,
        truth_lost: (0..n).filter(|&p| lost[p]).collect(),
        lookup: OnceLock::new(),
    })
}
