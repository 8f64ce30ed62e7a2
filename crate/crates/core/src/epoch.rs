//! One epoch of the modified SAMME loop over a fixed label set.

use serde::{Deserialize, Serialize};

use crate::data::{random_guess_score, Distribution, FeatureMatrix, Label, ScoreTable};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::weak_learn::{Stump, StumpPool};

fn check_epsilon(epsilon: f64, m: usize) -> Result<()> {
    if m < 2 {
        return contract(format!("need at least 2 labels, got {m}"));
    }
    if !(epsilon > 0.0) {
        return contract(format!(
            "epsilon must be in (0, (m-1)/m), got {epsilon}; a perfect round is handled by the caller"
        ));
    }
    let bound = (m as f64 - 1.0) / m as f64;
    if epsilon >= bound {
        return Err(BoostError::WeakLearnabilityViolation {
            epoch: None,
            round: 0,
            epsilon,
            bound,
            labels: m,
        });
    }
    Ok(())
}

/// Vote weight `log((m-1)(1-eps)/eps) / (2(m-1))`.
///
/// Equals the binary AdaBoost weight when `m = 2`.
pub fn compute_alpha(epsilon: f64, m: usize) -> Result<f64> {
    check_epsilon(epsilon, m)?;
    let k = m as f64 - 1.0;
    Ok((k * (1.0 - epsilon) / epsilon).ln() / (2.0 * k))
}

/// SAMME vote weight `((m-1)^2 / m) log((m-1)(1-eps)/eps)`.
pub fn compute_alpha_samme(epsilon: f64, m: usize) -> Result<f64> {
    check_epsilon(epsilon, m)?;
    let k = m as f64 - 1.0;
    Ok(k * k / m as f64 * (k * (1.0 - epsilon) / epsilon).ln())
}

/// Exponential reweighting: correct observations are scaled by
/// `exp(-(m-1) alpha)`, wrong ones by `exp(alpha)`, then renormalized.
///
/// Returns the new distribution and the normalizer `Z`.
pub fn reweight(
    d: &Distribution,
    h: &[Label],
    y: &[Label],
    alpha: f64,
    m: usize,
) -> Result<(Distribution, f64)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return contract(format!("alpha must be positive, got {alpha}"));
    }
    if h.len() != y.len() || y.len() != d.len() {
        return contract("length mismatch in reweight");
    }
    let hit = (-alpha * (m as f64 - 1.0)).exp();
    let miss = alpha.exp();
    let w: Vec<f64> = d
        .weights()
        .iter()
        .zip(h.iter().zip(y))
        .map(|(dp, (a, b))| dp * if a == b { hit } else { miss })
        .collect();
    let z: f64 = w.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(BoostError::Numeric(format!("normalizer Z = {z}")));
    }
    Ok((Distribution::from_raw(w.into_iter().map(|v| v / z).collect()), z))
}

/// The normalizer as a function of the round error:
/// `phi(eps) = (m-1)^(-1/2) sqrt(eps (1-eps)) + (m-1)^c (1-eps)^c eps^(1-c)`
/// with `c = 1/(2(m-1))`. Strictly concave on `[0, 1]`, with maximum 1 at
/// `eps = 1 - 1/m`.
pub fn phi(epsilon: f64, m: usize) -> f64 {
    let k = m as f64 - 1.0;
    let c = 1.0 / (2.0 * k);
    let one_minus = 1.0 - epsilon;
    k.powf(-0.5) * (epsilon * one_minus).sqrt()
        + k.powf(c) * one_minus.powf(c) * epsilon.powf(1.0 - c)
}

/// Add one round's vote to the score table.
pub fn update_psi(mut table: ScoreTable, h: &[Label], alpha: f64) -> Result<ScoreTable> {
    table.update(h, alpha)?;
    Ok(table)
}

/// Everything recorded about one boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub hypothesis: Stump,
    pub alpha: f64,
    pub epsilon: f64,
    pub edge: f64,
    /// Edge over random guessing, `(1 - 2 eps) - (2 - m)/m`.
    pub gamma: f64,
    pub z: f64,
}

/// Outcome of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub label_size: usize,
    pub rounds: Vec<RoundRecord>,
    /// Set when a round had zero weighted error; that hypothesis alone is the
    /// epoch's output and `psi` holds its unit-weight vote.
    pub perfect: Option<Stump>,
    /// The stopping round `K_i`.
    pub terminal_round: usize,
    pub psi: ScoreTable,
}

impl EpochRecord {
    /// Running products `Z_1 ... Z_k`.
    pub fn z_products(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .scan(1.0, |acc, r| {
                *acc *= r.z;
                Some(*acc)
            })
            .collect()
    }

    /// `Psi_a(x)` for each label of this epoch, from the stored hypotheses.
    pub fn scores_at(&self, x: &[f64]) -> Vec<f64> {
        let m = self.label_size;
        let mut psi = vec![0.0; m];
        let mut vote = |label: Label, alpha: f64| {
            for (a, v) in psi.iter_mut().enumerate() {
                if a == label {
                    *v += alpha * (m as f64 - 1.0);
                } else {
                    *v -= alpha;
                }
            }
        };
        match &self.perfect {
            Some(stump) => vote(stump.apply(x), 1.0),
            None => {
                for r in &self.rounds {
                    vote(r.hypothesis.apply(x), r.alpha);
                }
            }
        }
        psi
    }
}

/// Parameters of a single epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochConfig {
    /// Minimum epoch length `K`.
    pub min_rounds: usize,
    /// Defaults to `50 K m` when `None`.
    pub round_cap: Option<usize>,
    pub exec: Execution,
}

impl EpochConfig {
    pub fn new(min_rounds: usize) -> Self {
        EpochConfig {
            min_rounds,
            round_cap: None,
            exec: Execution::default(),
        }
    }

    pub fn cap_for(&self, m: usize) -> usize {
        self.round_cap.unwrap_or(50 * self.min_rounds * m)
    }
}

/// State visible to an observer after each completed (non-perfect) round.
pub struct RoundTrace<'a> {
    pub round: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub z: f64,
    pub z_product: f64,
    /// `d_{k+1}`.
    pub distribution: &'a Distribution,
    pub table: &'a ScoreTable,
    pub targets: &'a [Label],
}

/// Run one epoch on targets `y` in `0..m` (see [`run_epoch_observed`]).
pub fn run_epoch(
    features: &FeatureMatrix,
    y: &[Label],
    m: usize,
    pool: &StumpPool,
    config: &EpochConfig,
) -> Result<EpochRecord> {
    run_epoch_observed(features, y, m, pool, config, &mut |_| {})
}

/// Run rounds from the uniform distribution until the first `k >= K` at
/// which every observation has a label with negative `Psi`, or until a
/// round has zero weighted error.
pub fn run_epoch_observed(
    features: &FeatureMatrix,
    y: &[Label],
    m: usize,
    pool: &StumpPool,
    config: &EpochConfig,
    observer: &mut dyn FnMut(&RoundTrace<'_>),
) -> Result<EpochRecord> {
    if config.min_rounds == 0 {
        return contract("minimum epoch length K must be at least 1");
    }
    if m < 2 {
        return contract(format!("epoch needs at least 2 labels, got {m}"));
    }
    if pool.labels() != m || pool.observations() != y.len() || features.len() != y.len() {
        return contract(format!(
            "pool is for {} labels over {} observations; epoch has {m} labels over {}",
            pool.labels(),
            pool.observations(),
            y.len()
        ));
    }
    let guess = random_guess_score(m)?;
    let cap = config.cap_for(m);
    let mut d = Distribution::uniform(y.len())?;
    let mut table = ScoreTable::new(y.len(), m);
    let mut rounds = Vec::new();
    let mut z_product = 1.0;

    for k in 1.. {
        if k > cap {
            return Err(BoostError::EpochDivergence {
                epoch: None,
                round_cap: cap,
            });
        }
        let best = pool.best_hypothesis(y, &d, config.exec)?;
        let h = pool.realization(best.index);
        if best.epsilon == 0.0 {
            if h.realized != y {
                return Err(BoostError::Numeric(format!(
                    "observation weights underflowed in round {k}"
                )));
            }
            let psi = ScoreTable::unit(&h.realized, m)?;
            return Ok(EpochRecord {
                label_size: m,
                rounds,
                perfect: Some(h.stump),
                terminal_round: k,
                psi,
            });
        }
        let alpha = compute_alpha(best.epsilon, m).map_err(|e| match e {
            BoostError::WeakLearnabilityViolation {
                epsilon,
                bound,
                labels,
                ..
            } => BoostError::WeakLearnabilityViolation {
                epoch: None,
                round: k,
                epsilon,
                bound,
                labels,
            },
            other => other,
        })?;
        let (next, z) = reweight(&d, &h.realized, y, alpha, m)?;
        d = next;
        z_product *= z;
        table.update(&h.realized, alpha)?;
        rounds.push(RoundRecord {
            hypothesis: h.stump,
            alpha,
            epsilon: best.epsilon,
            edge: best.edge,
            gamma: best.edge - guess,
            z,
        });
        observer(&RoundTrace {
            round: k,
            epsilon: best.epsilon,
            alpha,
            z,
            z_product,
            distribution: &d,
            table: &table,
            targets: y,
        });
        if k >= config.min_rounds && table.every_row_has_negative() {
            return Ok(EpochRecord {
                label_size: m,
                rounds,
                perfect: None,
                terminal_round: k,
                psi: table,
            });
        }
    }
    unreachable!("round loop only exits by returning")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_learn::PoolSpec;

    #[test]
    fn alpha_values() {
        assert!((compute_alpha(0.25, 2).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((compute_alpha(0.5, 3).unwrap() - 0.25 * 2f64.ln()).abs() < 1e-15);
        assert!((compute_alpha(0.5, 3).unwrap() - 0.173287).abs() < 1e-6);
        let near = compute_alpha(2.0 / 3.0 - 1e-9, 3).unwrap();
        assert!(near > 0.0 && near < 1e-8);
    }

    #[test]
    fn alpha_samme_values() {
        assert!((compute_alpha_samme(0.25, 2).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((compute_alpha_samme(0.5, 3).unwrap() - 4.0 / 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!((compute_alpha_samme(0.5, 3).unwrap() - 0.924196).abs() < 1e-6);
    }

    #[test]
    fn alpha_rejects_out_of_range() {
        assert!(matches!(
            compute_alpha(2.0 / 3.0, 3),
            Err(BoostError::WeakLearnabilityViolation { .. })
        ));
        assert!(matches!(
            compute_alpha_samme(2.0 / 3.0, 3),
            Err(BoostError::WeakLearnabilityViolation { .. })
        ));
        assert!(matches!(compute_alpha(0.5, 2), Err(BoostError::WeakLearnabilityViolation { .. })));
        assert!(matches!(compute_alpha(0.0, 3), Err(BoostError::Contract(_))));
        assert!(matches!(compute_alpha(0.1, 1), Err(BoostError::Contract(_))));
    }

    #[test]
    fn reweight_perfect_hypothesis_keeps_distribution() {
        let d = Distribution::normalized(vec![1.0, 2.0, 3.0]).unwrap();
        let y = [0, 2, 1];
        let alpha = 0.3;
        let (next, z) = reweight(&d, &y, &y, alpha, 3).unwrap();
        for (a, b) in next.weights().iter().zip(d.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((z - (-alpha * 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn reweight_binary_half_mass_identity() {
        // Uniform on 4, wrong on one point, alpha = ln(3)/2.
        let d = Distribution::uniform(4).unwrap();
        let y = [0, 0, 1, 1];
        let h = [0, 0, 1, 0];
        let alpha = compute_alpha(0.25, 2).unwrap();
        let (next, z) = reweight(&d, &h, &y, alpha, 2).unwrap();
        let w = next.weights();
        assert!((w[3] - 0.5).abs() < 1e-12);
        for v in &w[..3] {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!((z - phi(0.25, 2)).abs() < 1e-12);
    }

    #[test]
    fn phi_values() {
        for m in 2..=6 {
            let at = 1.0 - 1.0 / m as f64;
            assert!((phi(at, m) - 1.0).abs() < 1e-12, "m={m}");
        }
        assert!((phi(0.25, 2) - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(phi(0.0, 3), 0.0);
        let step = 1e-6;
        for m in 2..=6 {
            let at = 1.0 - 1.0 / m as f64;
            let deriv = (phi(at + step, m) - phi(at - step, m)) / (2.0 * step);
            assert!(deriv.abs() < 1e-6, "m={m} deriv={deriv}");
        }
    }

    #[test]
    fn update_psi_single_round() {
        let table = update_psi(ScoreTable::new(2, 3), &[1, 2], 0.4).unwrap();
        assert_eq!(table.psi_row(0), &[-0.4, 0.8, -0.4]);
        assert_eq!(table.psi_row(1), &[-0.4, -0.4, 0.8]);
    }

    fn line(xs: &[f64]) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn ms13_stump_epoch_is_perfect_at_round_one() {
        let features = line(&[0.0, 1.0]);
        let pool = StumpPool::build(&features, 3, &PoolSpec::Axis).unwrap();
        let rec = run_epoch(&features, &[0, 1], 3, &pool, &EpochConfig::new(10)).unwrap();
        assert!(rec.perfect.is_some());
        assert_eq!(rec.terminal_round, 1);
        assert!(rec.psi.psi(0, 0) > 0.0);
        assert!(rec.psi.psi(1, 1) > 0.0);
    }

    #[test]
    fn binary_epoch_stops_at_k() {
        let features = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0, 1, 0, 1, 1, 0];
        let pool = StumpPool::build(&features, 2, &PoolSpec::Axis).unwrap();
        for k in [1, 3, 7] {
            let mut zero_row_at_k = false;
            let rec = run_epoch_observed(&features, &y, 2, &pool, &EpochConfig::new(k), &mut |t| {
                if t.round == k {
                    zero_row_at_k = (0..t.targets.len())
                        .any(|p| t.table.psi_row(p).iter().all(|v| *v == 0.0));
                }
            })
            .unwrap();
            if !zero_row_at_k {
                assert_eq!(rec.terminal_round, k);
            }
            assert!(rec.terminal_round >= k);
            assert!(rec.rounds.iter().all(|r| r.alpha > 0.0 && r.gamma > 0.0));
        }
    }

    #[test]
    fn first_round_shrinks_mass() {
        let features = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0, 1, 2, 1, 0, 2];
        let pool = StumpPool::build(&features, 3, &PoolSpec::Axis).unwrap();
        let rec = run_epoch(&features, &y, 3, &pool, &EpochConfig::new(5)).unwrap();
        assert!(rec.rounds[0].z < 1.0);
        for r in &rec.rounds {
            assert!(r.z > 0.0 && r.z <= 1.0);
            assert!((r.z - phi(r.epsilon, 3)).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_cap_diverges() {
        let features = line(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0, 1, 0, 1];
        let pool = StumpPool::build(&features, 2, &PoolSpec::Axis).unwrap();
        let config = EpochConfig {
            min_rounds: 5,
            round_cap: Some(3),
            exec: Execution::Sequential,
        };
        assert!(matches!(
            run_epoch(&features, &y, 2, &pool, &config),
            Err(BoostError::EpochDivergence { .. })
        ));
    }

    #[test]
    fn violated_learnability_is_reported() {
        // Constant pool {1, 2} against balanced targets over two labels: epsilon = 1/2.
        let features = line(&[0.0, 1.0]);
        let spec = PoolSpec::Fixed(vec![Stump::constant(0), Stump::constant(1)]);
        let pool = StumpPool::build(&features, 2, &spec).unwrap();
        let err = run_epoch(&features, &[0, 1], 2, &pool, &EpochConfig::new(3)).unwrap_err();
        assert!(matches!(err, BoostError::WeakLearnabilityViolation { round: 1, .. }));
    }
}
