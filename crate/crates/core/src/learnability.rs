//! Weak and iterative weak learnability as finite zero-sum games.
//!
//! The distribution player picks `d` over observations to minimize the best
//! score any pool member achieves; the value is compared against the
//! random-guess score `(2 - m)/m`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{random_guess_score, FeatureMatrix, Label};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::game::solve_matrix_game;
use crate::io::{one_based, FORMAT_VERSION};
use crate::weak_learn::{PoolSpec, StumpPool};

/// Margins at or below this count as zero.
pub const RHO_TOL: f64 = 1e-9;
/// Largest certified duality gap accepted from the solver.
pub const GAP_TOL: f64 = 1e-9;

/// Exhaustive mode limits.
pub const MAX_EXHAUSTIVE_LABELS: usize = 6;
pub const MAX_EXHAUSTIVE_OBSERVATIONS: usize = 12;
pub const MAX_EXHAUSTIVE_LABELINGS: u64 = 1_000_000;

const CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_margin(margin: f64, rho_tol: f64) -> Self {
        if margin > rho_tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// Solution of `min_d max_h score(h, y, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameValue {
    /// `max_h score(h, y, witness_d)`.
    pub value: f64,
    /// The hypothesis-mixture player's guaranteed score.
    pub dual_value: f64,
    pub witness_d: Vec<f64>,
}

fn payoff_rows<'a>(realizations: impl Iterator<Item = &'a [Label]>, y: &[Label]) -> Vec<Vec<f64>> {
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut rows = Vec::new();
    for h in realizations {
        let hits: Vec<bool> = h.iter().zip(y).map(|(a, b)| a == b).collect();
        if seen.insert(hits.clone()) {
            rows.push(hits.into_iter().map(|c| if c { 1.0 } else { -1.0 }).collect());
        }
    }
    rows
}

fn solve(realizations: &[Vec<Label>], y: &[Label]) -> Result<GameValue> {
    if realizations.is_empty() {
        return contract("hypothesis pool is empty");
    }
    if y.is_empty() {
        return contract("no observations");
    }
    if let Some(h) = realizations.iter().find(|h| h.len() != y.len()) {
        return contract(format!(
            "hypothesis covers {} observations, labeling has {}",
            h.len(),
            y.len()
        ));
    }
    let payoff = payoff_rows(realizations.iter().map(Vec::as_slice), y);
    let s = solve_matrix_game(&payoff, GAP_TOL)?;
    Ok(GameValue {
        value: s.upper_value,
        dual_value: s.lower_value,
        witness_d: s.column_strategy,
    })
}

/// Value of the game with payoff `+1` where `h(p) = y(p)` and `-1` elsewhere.
pub fn game_value(realizations: &[Vec<Label>], y: &[Label]) -> Result<GameValue> {
    solve(realizations, y)
}

/// Outcome of one learnability check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameValueReport {
    pub subset_size: usize,
    #[serde(with = "one_based::labels")]
    pub labeling: Vec<Label>,
    pub value: f64,
    pub dual_value: f64,
    /// Random-guess score `(2 - m)/m`.
    pub threshold: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub witness_d: Vec<f64>,
}

/// Check `min_d max_h score > (2 - m)/m + rho_tol` for one labeling.
pub fn weak_learnability(
    realizations: &[Vec<Label>],
    y: &[Label],
    m: usize,
    rho_tol: f64,
) -> Result<GameValueReport> {
    let threshold = random_guess_score(m)?;
    if let Some(&a) = y.iter().find(|&&a| a >= m) {
        return contract(format!("label {} outside 1..={m}", a + 1));
    }
    let g = solve(realizations, y)?;
    let margin = g.value - threshold;
    Ok(GameValueReport {
        subset_size: m,
        labeling: y.to_vec(),
        value: g.value,
        dual_value: g.dual_value,
        threshold,
        margin,
        verdict: Verdict::from_margin(margin, rho_tol),
        witness_d: g.witness_d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "labeling")]
pub enum LabelingMode {
    /// Check one labeling (0-based in memory, 1-based on disk).
    Given(#[serde(with = "one_based::labels")] Vec<Label>),
    /// Check every labeling of the observations into each subset.
    Exhaustive,
}

/// Worst case found for one subset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub subset_size: usize,
    pub threshold: f64,
    /// False when the given labeling uses labels beyond this size.
    pub applicable: bool,
    pub labelings_checked: u64,
    pub pool_size: usize,
    pub worst: Option<GameValueReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeReport {
    pub format_version: u32,
    pub num_labels: usize,
    pub observations: usize,
    pub rho_tol: f64,
    #[serde(flatten)]
    pub mode: LabelingMode,
    pub sizes: Vec<SizeReport>,
    pub min_margin: Option<f64>,
    pub verdict: Verdict,
}

fn labeling_at(index: u64, s: usize, n: usize) -> Vec<Label> {
    let mut y = vec![0; n];
    let mut rest = index;
    for slot in y.iter_mut().rev() {
        *slot = (rest % s as u64) as Label;
        rest /= s as u64;
    }
    y
}

fn exhaustive_count(num_labels: usize, n: usize) -> Option<u64> {
    (2..=num_labels).try_fold(0u64, |acc, s| acc.checked_add((s as u64).checked_pow(n as u32)?))
}

/// Check that every subset size `2..=|A|` is weakly learnable with the pool
/// the pool spec generates for that size.
pub fn iterative_weak_learnability(
    features: &FeatureMatrix,
    num_labels: usize,
    spec: &PoolSpec,
    mode: &LabelingMode,
    rho_tol: f64,
    exec: Execution,
) -> Result<IterativeReport> {
    let n = features.len();
    if num_labels < 2 {
        return contract(format!("need at least 2 labels, got {num_labels}"));
    }
    match mode {
        LabelingMode::Given(y) => {
            if y.len() != n {
                return contract(format!("labeling has {} entries for {n} observations", y.len()));
            }
            if let Some(&a) = y.iter().find(|&&a| a >= num_labels) {
                return contract(format!("label {} outside 1..={num_labels}", a + 1));
            }
        }
        LabelingMode::Exhaustive => {
            let total = exhaustive_count(num_labels, n);
            if num_labels > MAX_EXHAUSTIVE_LABELS
                || n > MAX_EXHAUSTIVE_OBSERVATIONS
                || total.is_none_or(|t| t > MAX_EXHAUSTIVE_LABELINGS)
            {
                return Err(BoostError::Guard(format!(
                    "exhaustive labeling needs |A| <= {MAX_EXHAUSTIVE_LABELS}, |P| <= {MAX_EXHAUSTIVE_OBSERVATIONS} \
                     and at most {MAX_EXHAUSTIVE_LABELINGS} labelings in total (got |A| = {num_labels}, |P| = {n}); \
                     check the data's own labels instead"
                )));
            }
        }
    }

    let mut sizes = Vec::new();
    for s in 2..=num_labels {
        let threshold = random_guess_score(s)?;
        let given = match mode {
            LabelingMode::Given(y) if y.iter().any(|&a| a >= s) => {
                sizes.push(SizeReport {
                    subset_size: s,
                    threshold,
                    applicable: false,
                    labelings_checked: 0,
                    pool_size: 0,
                    worst: None,
                });
                continue;
            }
            LabelingMode::Given(y) => Some(y),
            LabelingMode::Exhaustive => None,
        };
        let pool = StumpPool::build(features, s, spec)?;
        let realizations = pool.realizations();
        let (checked, worst) = match given {
            Some(y) => (1, weak_learnability(&realizations, y, s, rho_tol)?),
            None => {
                let total = (s as u64).pow(n as u32);
                let chunks = total.div_ceil(CHUNK) as usize;
                let partial = exec.map_indices(chunks, |c| -> Result<Option<(f64, u64)>> {
                    let start = c as u64 * CHUNK;
                    let mut best: Option<(f64, u64)> = None;
                    for index in start..(start + CHUNK).min(total) {
                        let y = labeling_at(index, s, n);
                        let margin = solve(&realizations, &y)?.value - threshold;
                        if best.is_none_or(|(b, _)| margin < b) {
                            best = Some((margin, index));
                        }
                    }
                    Ok(best)
                });
                let mut best: Option<(f64, u64)> = None;
                for chunk in partial {
                    if let Some((margin, index)) = chunk? {
                        if best.is_none_or(|(b, _)| margin < b) {
                            best = Some((margin, index));
                        }
                    }
                }
                let (_, index) = best.expect("at least one labeling");
                let y = labeling_at(index, s, n);
                (total, weak_learnability(&realizations, &y, s, rho_tol)?)
            }
        };
        sizes.push(SizeReport {
            subset_size: s,
            threshold,
            applicable: true,
            labelings_checked: checked,
            pool_size: realizations.len(),
            worst: Some(worst),
        });
    }

    let min_margin = sizes
        .iter()
        .filter_map(|r| r.worst.as_ref().map(|w| w.margin))
        .reduce(f64::min);
    Ok(IterativeReport {
        format_version: FORMAT_VERSION,
        num_labels,
        observations: n,
        rho_tol,
        mode: mode.clone(),
        sizes,
        min_margin,
        verdict: Verdict::from_margin(min_margin.unwrap_or(f64::NEG_INFINITY), rho_tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_learn::Stump;

    fn ms13_constants() -> Vec<Vec<Label>> {
        vec![vec![0, 0], vec![1, 1]]
    }

    #[test]
    fn ms13_value_zero_at_half() {
        let g = game_value(&ms13_constants(), &[0, 1]).unwrap();
        assert!(g.value.abs() < 1e-12);
        assert!((g.witness_d[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pool_containing_y_has_value_one() {
        let g = game_value(&[vec![0, 1], vec![1, 1]], &[0, 1]).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_constant_value_minus_one() {
        let g = game_value(&[vec![0, 0]], &[0, 1]).unwrap();
        assert!((g.value + 1.0).abs() < 1e-12);
        assert!((g.witness_d[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ms13_verdicts() {
        let full = weak_learnability(&ms13_constants(), &[0, 1], 3, RHO_TOL).unwrap();
        assert_eq!(full.verdict, Verdict::Pass);
        assert!((full.margin - 1.0 / 3.0).abs() < 1e-8);
        let pair = weak_learnability(&ms13_constants(), &[0, 1], 2, RHO_TOL).unwrap();
        assert_eq!(pair.verdict, Verdict::Fail);
        assert!(pair.margin.abs() < 1e-12);
    }

    #[test]
    fn stump_split_passes() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let pool = StumpPool::build(&x, 2, &PoolSpec::Axis).unwrap();
        let r = weak_learnability(&pool.realizations(), &[0, 1], 2, RHO_TOL).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn iterative_ms13_fails_at_two() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let spec = PoolSpec::Fixed(vec![Stump::constant(0), Stump::constant(1)]);
        let r = iterative_weak_learnability(
            &x,
            3,
            &spec,
            &LabelingMode::Given(vec![0, 1]),
            RHO_TOL,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.sizes[0].worst.as_ref().unwrap().verdict, Verdict::Fail);
        assert_eq!(r.sizes[1].worst.as_ref().unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn given_labeling_skips_small_sizes() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let r = iterative_weak_learnability(
            &x,
            3,
            &PoolSpec::Axis,
            &LabelingMode::Given(vec![0, 2]),
            RHO_TOL,
            Execution::Sequential,
        )
        .unwrap();
        assert!(!r.sizes[0].applicable);
        assert!(r.sizes[1].applicable);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn exhaustive_stumps_on_a_line() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let r = iterative_weak_learnability(&x, 3, &PoolSpec::Axis, &LabelingMode::Exhaustive, RHO_TOL, exec)
                .unwrap();
            assert_eq!(r.verdict, Verdict::Pass);
            assert_eq!(r.sizes[0].labelings_checked, 8);
            assert_eq!(r.sizes[1].labelings_checked, 27);
        }
    }

    #[test]
    fn exhaustive_guard() {
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let r = iterative_weak_learnability(&x, 2, &PoolSpec::Axis, &LabelingMode::Exhaustive, RHO_TOL, Execution::Sequential);
        assert!(matches!(r, Err(BoostError::Guard(_))));
    }

    #[test]
    fn labeling_order_is_lexicographic() {
        assert_eq!(labeling_at(0, 3, 2), vec![0, 0]);
        assert_eq!(labeling_at(1, 3, 2), vec![0, 1]);
        assert_eq!(labeling_at(3, 3, 2), vec![1, 0]);
        assert_eq!(labeling_at(8, 3, 2), vec![2, 2]);
    }
}
