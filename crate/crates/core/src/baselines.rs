//! Reference SAMME and binary AdaBoost, for equivalence and failure-mode
//! comparisons against the eliminating ensemble.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Distribution, FeatureMatrix, Label};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::weak_learn::{Stump, StumpPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Samme,
    AdaBoost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRound {
    pub hypothesis: Stump,
    pub alpha: f64,
    pub epsilon: f64,
}

/// Weighted-majority ensemble `argmax_a sum_s alpha_s 1[h_s(x) = a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SammeModel {
    pub algorithm: Algorithm,
    pub num_labels: usize,
    pub dim: usize,
    pub rounds: Vec<WeightedRound>,
    /// A zero-error hypothesis that ended training; it alone is the model.
    pub perfect: Option<Stump>,
}

impl SammeModel {
    fn votes_upto(&self, x: &[f64], rounds: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.num_labels];
        for r in &self.rounds[..rounds] {
            f[r.hypothesis.apply(x)] += r.alpha;
        }
        f
    }

    fn vote_winner(f: &[f64]) -> Label {
        let mut best = 0;
        for (a, v) in f.iter().enumerate() {
            if *v > f[best] {
                best = a;
            }
        }
        best
    }

    /// Prediction of the first `rounds` rounds (smallest label on ties).
    pub fn predict_prefix(&self, x: &[f64], rounds: usize) -> Label {
        match &self.perfect {
            Some(stump) => stump.apply(x),
            None => Self::vote_winner(&self.votes_upto(x, rounds.min(self.rounds.len()))),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim {
            return contract(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.dim
            ));
        }
        Ok(self.predict_prefix(x, self.rounds.len()))
    }

    pub fn predict_all(&self, features: &FeatureMatrix) -> Result<Vec<Label>> {
        features.rows().map(|x| self.predict(x)).collect()
    }

    pub fn error_on(&self, data: &Dataset) -> Result<f64> {
        let predictions = self.predict_all(data.features())?;
        let wrong = predictions
            .iter()
            .zip(data.labels())
            .filter(|(a, b)| a != b)
            .count();
        Ok(wrong as f64 / data.len() as f64)
    }

    /// Training error of the prefix ensemble after each round `1..=len`.
    pub fn error_curve(&self, data: &Dataset) -> Vec<f64> {
        let n = data.len() as f64;
        let mut votes = vec![vec![0.0; self.num_labels]; data.len()];
        self.rounds
            .iter()
            .map(|r| {
                let mut wrong = 0usize;
                for (p, x) in data.features().rows().enumerate() {
                    votes[p][r.hypothesis.apply(x)] += r.alpha;
                    if Self::vote_winner(&votes[p]) != data.labels()[p] {
                        wrong += 1;
                    }
                }
                wrong as f64 / n
            })
            .collect()
    }
}

fn check_pool(data: &Dataset, pool: &StumpPool, rounds: usize) -> Result<()> {
    if rounds == 0 {
        return contract("number of rounds must be at least 1");
    }
    if pool.labels() != data.num_labels() || pool.observations() != data.len() {
        return contract(format!(
            "pool is for {} labels over {} observations, data has {} labels over {}",
            pool.labels(),
            pool.observations(),
            data.num_labels(),
            data.len()
        ));
    }
    Ok(())
}

fn violation(round: usize, epsilon: f64, bound: f64, labels: usize) -> BoostError {
    BoostError::WeakLearnabilityViolation {
        epoch: None,
        round,
        epsilon,
        bound,
        labels,
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `rounds` rounds of SAMME with the `((m-1)^2/m) log(...)` weight.
///
/// Weights are kept as logarithms: the SAMME weight grows fast enough on
/// inseparable data that plain weights underflow within a few rounds.
pub fn samme_train(data: &Dataset, rounds: usize, pool: &StumpPool, exec: Execution) -> Result<SammeModel> {
    check_pool(data, pool, rounds)?;
    let m = data.num_labels();
    let k = (m - 1) as f64;
    let y = data.labels();
    let mut log_w = vec![0.0; data.len()];
    let mut model = SammeModel {
        algorithm: Algorithm::Samme,
        num_labels: m,
        dim: data.dim(),
        rounds: Vec::new(),
        perfect: None,
    };
    for round in 1..=rounds {
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d = Distribution::normalized(log_w.iter().map(|l| (l - top).exp()).collect())?;
        let best = pool.best_hypothesis(y, &d, exec)?;
        let h = pool.realization(best.index);
        let hits: Vec<bool> = h.realized.iter().zip(y).map(|(a, b)| a == b).collect();
        if hits.iter().all(|&c| c) {
            model.rounds.clear();
            model.perfect = Some(h.stump);
            break;
        }
        let total = log_sum_exp(log_w.iter().cloned());
        let pick = |want: bool| log_sum_exp(log_w.iter().zip(&hits).filter(move |(_, &c)| c == want).map(|(l, _)| *l));
        let log_eps = pick(false) - total;
        let log_right = pick(true) - total;
        let bound = k / m as f64;
        if log_eps >= bound.ln() {
            return Err(violation(round, log_eps.exp(), bound, m));
        }
        let alpha = k * k / m as f64 * (k.ln() + log_right - log_eps);
        for (l, &c) in log_w.iter_mut().zip(&hits) {
            *l += if c { -k * alpha } else { alpha };
        }
        model.rounds.push(WeightedRound {
            hypothesis: h.stump,
            alpha,
            epsilon: log_eps.exp(),
        });
    }
    Ok(model)
}

/// Classical binary AdaBoost: `alpha = log((1-eps)/eps) / 2` and
/// `d(p) <- d(p) exp(-alpha y(p) h(p))` with `{-1, +1}` coding.
pub fn adaboost_train(data: &Dataset, rounds: usize, pool: &StumpPool, exec: Execution) -> Result<SammeModel> {
    if data.num_labels() != 2 {
        return contract(format!("AdaBoost needs 2 labels, got {}", data.num_labels()));
    }
    check_pool(data, pool, rounds)?;
    let sign = |l: Label| if l == 0 { 1.0 } else { -1.0 };
    let y = data.labels();
    let mut d = Distribution::uniform(data.len())?;
    let mut model = SammeModel {
        algorithm: Algorithm::AdaBoost,
        num_labels: 2,
        dim: data.dim(),
        rounds: Vec::new(),
        perfect: None,
    };
    for k in 1..=rounds {
        let best = pool.best_hypothesis(y, &d, exec)?;
        let h = pool.realization(best.index);
        let epsilon = best.epsilon;
        if h.realized == y {
            model.rounds.clear();
            model.perfect = Some(h.stump);
            break;
        }
        if epsilon >= 0.5 {
            return Err(violation(k, epsilon, 0.5, 2));
        }
        let alpha = 0.5 * ((1.0 - epsilon) / epsilon).ln();
        let w: Vec<f64> = d
            .weights()
            .iter()
            .zip(h.realized.iter().zip(y))
            .map(|(dp, (&hp, &yp))| dp * (-alpha * sign(yp) * sign(hp)).exp())
            .collect();
        d = Distribution::normalized(w)?;
        model.rounds.push(WeightedRound {
            hypothesis: h.stump,
            alpha,
            epsilon,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_learn::PoolSpec;

    fn line(xs: &[f64], labels: Vec<Label>, m: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, labels, m).unwrap()
    }

    #[test]
    fn ms13_samme_never_separates() {
        let data = line(&[0.0, 1.0], vec![0, 1], 3);
        let spec = PoolSpec::Fixed(vec![Stump::constant(0), Stump::constant(1)]);
        let pool = StumpPool::build(data.features(), 3, &spec).unwrap();
        let model = samme_train(&data, 200, &pool, Execution::Sequential).unwrap();
        assert!(model.perfect.is_none());
        assert_eq!(model.rounds.len(), 200);
        assert!(model.rounds.iter().all(|r| r.alpha > 0.0 && r.alpha.is_finite()));
        for err in model.error_curve(&data) {
            assert!(err >= 0.5);
        }
        let p = model.predict_all(data.features()).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn perfect_pool_stops_at_first_round() {
        let data = line(&[0.0, 1.0, 2.0], vec![0, 0, 1], 2);
        let pool = StumpPool::build(data.features(), 2, &PoolSpec::Axis).unwrap();
        for model in [
            samme_train(&data, 10, &pool, Execution::Sequential).unwrap(),
            adaboost_train(&data, 10, &pool, Execution::Sequential).unwrap(),
        ] {
            assert!(model.perfect.is_some());
            assert!(model.rounds.is_empty());
            assert_eq!(model.error_on(&data).unwrap(), 0.0);
        }
    }

    #[test]
    fn adaboost_first_alpha() {
        // Uniform over 4 points where the best stump misses exactly one.
        let data = line(&[0.0, 1.0, 2.0, 3.0], vec![0, 1, 0, 0], 2);
        let pool = StumpPool::build(data.features(), 2, &PoolSpec::Axis).unwrap();
        let model = adaboost_train(&data, 1, &pool, Execution::Sequential).unwrap();
        assert_eq!(model.rounds[0].epsilon, 0.25);
        assert!((model.rounds[0].alpha - 0.5 * 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn samme_equals_adaboost_on_two_labels() {
        let data = line(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            vec![0, 1, 1, 0, 1, 0, 0, 1],
            2,
        );
        let pool = StumpPool::build(data.features(), 2, &PoolSpec::Axis).unwrap();
        let a = adaboost_train(&data, 12, &pool, Execution::Sequential).unwrap();
        let s = samme_train(&data, 12, &pool, Execution::Sequential).unwrap();
        assert_eq!(a.rounds.len(), s.rounds.len());
        for (ra, rs) in a.rounds.iter().zip(&s.rounds) {
            assert_eq!(ra.hypothesis, rs.hypothesis);
            assert!((ra.alpha - rs.alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn samme_first_rounds_match_direct_weights() {
        // Round 1: eps 1/2, alpha (4/3) ln 2. Then d(a) is proportional to
        // exp(-2 alpha_1) and d(b) to exp(alpha_1), so eps_2 = 1/(1 + 2^4).
        let data = line(&[0.0, 1.0], vec![0, 1], 3);
        let spec = PoolSpec::Fixed(vec![Stump::constant(0), Stump::constant(1)]);
        let pool = StumpPool::build(data.features(), 3, &spec).unwrap();
        let model = samme_train(&data, 2, &pool, Execution::Sequential).unwrap();
        assert!((model.rounds[0].alpha - 4.0 / 3.0 * 2f64.ln()).abs() < 1e-14);
        assert!((model.rounds[1].epsilon - 1.0 / 17.0).abs() < 1e-14);
        assert_eq!(model.rounds[1].hypothesis, Stump::constant(1));
    }

    #[test]
    fn adaboost_requires_binary() {
        let data = line(&[0.0, 1.0], vec![0, 1], 3);
        let pool = StumpPool::build(data.features(), 3, &PoolSpec::Axis).unwrap();
        assert!(adaboost_train(&data, 3, &pool, Execution::Sequential).is_err());
    }
}
