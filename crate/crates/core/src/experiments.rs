//! Experiment runners and the reports they produce.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{adaboost_train, samme_train, SammeModel};
use crate::data::{Dataset, Label};
use crate::eliminate::{train, train_observed, TrainConfig, TrainedModel};
use crate::error::{contract, BoostError, Result};
use crate::exec::Execution;
use crate::io::{one_based, FORMAT_VERSION};
use crate::learnability::{weak_learnability, GameValueReport, RHO_TOL};
use crate::synth::{sample_rng, Generator, GeneratorKind, DEFAULT_MARGIN};
use crate::weak_learn::{PoolSpec, Stump, StumpPool};

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// `None` with fewer than two points or constant `x`. A perfect fit of
/// constant `y` has `r_squared = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Split into `(training, holdout)`: the holdout is the first
/// `round(fraction n)` positions of a seeded permutation of the rows. Both
/// parts keep the original row order.
pub fn holdout_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    if !(0.0..1.0).contains(&fraction) {
        return contract(format!("holdout fraction must lie in [0, 1), got {fraction}"));
    }
    let n = data.len();
    let size = (fraction * n as f64).round() as usize;
    if size == 0 {
        return Ok((data.clone(), None));
    }
    if size >= n {
        return contract(format!("holdout of {size} rows leaves no training data"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held: Vec<usize> = order[..size].to_vec();
    let mut kept: Vec<usize> = order[size..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    Ok((data.select(&kept)?, Some(data.select(&held)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub edge: f64,
    pub gamma: f64,
    pub z: f64,
    pub z_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub label_size: usize,
    pub terminal_round: usize,
    pub eliminated_count: usize,
    pub next_label_size: usize,
    pub perfect: bool,
    pub truth_lost: usize,
    pub rounds: Vec<RoundMetrics>,
    /// Fit of `log prod Z` against the round index.
    pub decay: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutMetrics {
    pub size: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub algorithm: String,
    pub num_labels: usize,
    pub observations: usize,
    pub dim: usize,
    pub min_rounds: usize,
    pub epoch_count: usize,
    pub label_sizes: Vec<usize>,
    pub training_error: f64,
    pub truth_lost: usize,
    pub holdout: Option<HoldoutMetrics>,
    pub epochs: Vec<EpochMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
}

fn epoch_decay(rounds: &[RoundMetrics]) -> Option<LinearFit> {
    let xs: Vec<f64> = rounds.iter().map(|r| r.round as f64).collect();
    let ys: Vec<f64> = rounds.iter().map(|r| r.z_product.ln()).collect();
    linear_fit(&xs, &ys)
}

impl MetricsReport {
    pub fn for_model(model: &TrainedModel, holdout: Option<&Dataset>) -> Result<Self> {
        let epochs = model
            .epochs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let rounds: Vec<RoundMetrics> = e
                    .record
                    .rounds
                    .iter()
                    .zip(e.record.z_products())
                    .enumerate()
                    .map(|(k, (r, zp))| RoundMetrics {
                        round: k + 1,
                        alpha: r.alpha,
                        epsilon: r.epsilon,
                        edge: r.edge,
                        gamma: r.gamma,
                        z: r.z,
                        z_product: zp,
                    })
                    .collect();
                EpochMetrics {
                    epoch: i + 1,
                    label_size: e.record.label_size,
                    terminal_round: e.record.terminal_round,
                    eliminated_count: e.step.count,
                    next_label_size: e.step.next_label_size,
                    perfect: e.record.perfect.is_some(),
                    truth_lost: e.step.truth_lost.len(),
                    decay: epoch_decay(&rounds),
                    rounds,
                }
            })
            .collect();
        let holdout = match holdout {
            Some(h) => Some(HoldoutMetrics {
                size: h.len(),
                error: model.error_on(h)?,
            }),
            None => None,
        };
        Ok(MetricsReport {
            format_version: FORMAT_VERSION,
            algorithm: "tau".into(),
            num_labels: model.num_labels,
            observations: model.training_labels.len(),
            dim: model.dim,
            min_rounds: model.min_rounds,
            epoch_count: model.epoch_count(),
            label_sizes: model.label_sizes.clone(),
            training_error: model.training_error(),
            truth_lost: model.truth_lost.len(),
            holdout,
            epochs,
            wall_clock_seconds: None,
        })
    }
}

/// Training and holdout errors of one algorithm, or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Trained {
        rounds: usize,
        training_error: f64,
        holdout_error: Option<f64>,
    },
    Failed {
        error: String,
        message: String,
    },
}

impl Outcome {
    fn failed(e: &BoostError) -> Self {
        Outcome::Failed {
            error: e.kind().into(),
            message: e.to_string(),
        }
    }

    fn baseline(model: Result<SammeModel>, train: &Dataset, holdout: Option<&Dataset>) -> Result<Self> {
        match model {
            Ok(m) => Ok(Outcome::Trained {
                rounds: m.rounds.len().max(1),
                training_error: m.error_on(train)?,
                holdout_error: holdout.map(|h| m.error_on(h)).transpose()?,
            }),
            Err(e) if e.is_learnability_failure() => Ok(Outcome::failed(&e)),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub format_version: u32,
    pub num_labels: usize,
    pub observations: usize,
    pub holdout_size: usize,
    pub min_rounds: usize,
    pub tau: Outcome,
    pub samme: Outcome,
    pub adaboost: Option<Outcome>,
}

/// Train the eliminating ensemble and the baselines on the same split. The
/// baselines get as many rounds as the ensemble used in total.
pub fn compare(train_set: &Dataset, holdout: Option<&Dataset>, config: &TrainConfig) -> Result<CompareReport> {
    let (tau, budget) = match train(train_set, config) {
        Ok(model) => {
            let rounds: usize = model
                .epochs
                .iter()
                .map(|e| e.record.rounds.len().max(1))
                .sum();
            (
                Outcome::Trained {
                    rounds,
                    training_error: model.training_error(),
                    holdout_error: holdout.map(|h| model.error_on(h)).transpose()?,
                },
                rounds,
            )
        }
        Err(e) if e.is_learnability_failure() => (Outcome::failed(&e), config.min_rounds),
        Err(e) => return Err(e),
    };
    let pool = StumpPool::build(train_set.features(), train_set.num_labels(), &config.pool)?;
    let samme = Outcome::baseline(
        samme_train(train_set, budget, &pool, config.exec),
        train_set,
        holdout,
    )?;
    let adaboost = if train_set.num_labels() == 2 {
        Some(Outcome::baseline(
            adaboost_train(train_set, budget, &pool, config.exec),
            train_set,
            holdout,
        )?)
    } else {
        None
    };
    Ok(CompareReport {
        format_version: FORMAT_VERSION,
        num_labels: train_set.num_labels(),
        observations: train_set.len(),
        holdout_size: holdout.map_or(0, Dataset::len),
        min_rounds: config.min_rounds,
        tau,
        samme,
        adaboost,
    })
}

/// The two-point, three-label counterexample.
pub fn ms13_dataset() -> Dataset {
    Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], 3).expect("valid fixed dataset")
}

/// Constant hypotheses `x -> 1` and `x -> 2`.
pub fn ms13_constant_pool() -> PoolSpec {
    PoolSpec::Fixed(vec![Stump::constant(0), Stump::constant(1)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ms13Report {
    pub format_version: u32,
    pub samme_rounds: usize,
    /// Training error after each SAMME round.
    pub samme_error_curve: Vec<f64>,
    pub samme_min_error: f64,
    pub samme_final_error: f64,
    #[serde(with = "one_based::labels")]
    pub samme_predictions: Vec<Label>,
    pub tau_min_rounds: usize,
    pub tau_training_error: f64,
    #[serde(with = "one_based::labels")]
    pub tau_predictions: Vec<Label>,
    pub tau_epochs: usize,
    pub full_alphabet: GameValueReport,
    pub first_two_labels: GameValueReport,
    pub pass: bool,
}

/// SAMME with the constant pool against the eliminating ensemble with the
/// stump pool, plus both learnability checks of the constant pool.
pub fn repro_ms13(samme_rounds: usize, min_rounds: usize, exec: Execution) -> Result<Ms13Report> {
    let data = ms13_dataset();
    let constants = StumpPool::build(data.features(), 3, &ms13_constant_pool())?;
    let samme = samme_train(&data, samme_rounds, &constants, exec)?;
    let curve = samme.error_curve(&data);
    let samme_min_error = curve.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut config = TrainConfig::new(min_rounds);
    config.exec = exec;
    let tau = train(&data, &config)?;

    let realizations = constants.realizations();
    let pair_pool: Vec<Vec<Label>> = realizations
        .iter()
        .filter(|h| h.iter().all(|&a| a < 2))
        .cloned()
        .collect();
    let full_alphabet = weak_learnability(&realizations, data.labels(), 3, RHO_TOL)?;
    let first_two_labels = weak_learnability(&pair_pool, data.labels(), 2, RHO_TOL)?;

    let pass = samme_min_error >= 0.5
        && tau.training_error() == 0.0
        && full_alphabet.verdict.is_pass()
        && !first_two_labels.verdict.is_pass();
    Ok(Ms13Report {
        format_version: FORMAT_VERSION,
        samme_rounds,
        samme_final_error: samme.error_on(&data)?,
        samme_predictions: samme.predict_all(data.features())?,
        samme_error_curve: curve,
        samme_min_error,
        tau_min_rounds: min_rounds,
        tau_training_error: tau.training_error(),
        tau_predictions: tau.training_predictions.clone(),
        tau_epochs: tau.epoch_count(),
        full_alphabet,
        first_two_labels,
        pass,
    })
}

/// One row of the decay table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub epoch: usize,
    pub round: usize,
    pub label_size: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub z: f64,
    pub z_product: f64,
    /// Fraction of observations whose target has `Psi <= 0`.
    pub misclassified: f64,
    pub bound_holds: bool,
}

/// Per-round `prod Z` and the fraction of targets not yet winning.
pub fn decay(data: &Dataset, config: &TrainConfig) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::new();
    train_observed(data, config, &mut |epoch, t| {
        let n = t.targets.len();
        let bad = (0..n).filter(|&p| t.table.psi(p, t.targets[p]) <= 0.0).count();
        let misclassified = bad as f64 / n as f64;
        rows.push(DecayRow {
            epoch,
            round: t.round,
            label_size: t.table.labels(),
            epsilon: t.epsilon,
            alpha: t.alpha,
            z: t.z,
            z_product: t.z_product,
            misclassified,
            bound_holds: misclassified <= t.z_product + 1e-12,
        });
    })?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct GenGapConfig {
    pub sizes: Vec<usize>,
    pub test_size: usize,
    pub seeds: u64,
    pub base_seed: u64,
    pub num_labels: usize,
    pub kind: GeneratorKind,
    pub margin: f64,
    pub train: TrainConfig,
}

impl GenGapConfig {
    pub fn new(min_rounds: usize) -> Self {
        GenGapConfig {
            sizes: vec![50, 100, 200, 400],
            test_size: 2000,
            seeds: 20,
            base_seed: 0,
            num_labels: 3,
            kind: GeneratorKind::Regions,
            margin: DEFAULT_MARGIN,
            train: TrainConfig::new(min_rounds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenGapRow {
    pub sample_size: usize,
    pub seeds: u64,
    pub median_training_error: f64,
    pub median_test_error: f64,
    pub median_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenGapReport {
    pub format_version: u32,
    pub rows: Vec<GenGapRow>,
    /// Fit of the median gap against `1/sqrt(m)`.
    pub fit: Option<LinearFit>,
    pub nonincreasing: bool,
}

/// Median test-minus-training gap over seeds for each sample size. Seed
/// `s` fixes the region layout, the training sample (stream 0) and the
/// test sample (stream 1).
pub fn gen_gap(config: &GenGapConfig) -> Result<GenGapReport> {
    if config.sizes.is_empty() || config.seeds == 0 || config.test_size == 0 {
        return contract("gen-gap needs sample sizes, seeds and a test set");
    }
    let seeds = config.seeds as usize;
    let jobs = config.sizes.len() * seeds;
    let results = config.train.exec.map_indices(jobs, |j| -> Result<(f64, f64)> {
        let size = config.sizes[j / seeds];
        let seed = config.base_seed + (j % seeds) as u64;
        let generator = Generator::new(config.kind, config.num_labels, config.margin, seed)?;
        let train_set = generator.sample(size, &mut sample_rng(seed, 0))?;
        let test_set = generator.sample(config.test_size, &mut sample_rng(seed, 1))?;
        let mut train_config = config.train.clone();
        train_config.exec = Execution::Sequential;
        let model = train(&train_set, &train_config)?;
        Ok((model.training_error(), model.error_on(&test_set)?))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<GenGapRow> = config
        .sizes
        .iter()
        .zip(results.chunks(seeds))
        .map(|(&size, chunk)| {
            let mut train_err: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            let mut test_err: Vec<f64> = chunk.iter().map(|r| r.1).collect();
            let mut gap: Vec<f64> = chunk.iter().map(|r| r.1 - r.0).collect();
            GenGapRow {
                sample_size: size,
                seeds: config.seeds,
                median_training_error: median(&mut train_err),
                median_test_error: median(&mut test_err),
                median_gap: median(&mut gap),
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / (r.sample_size as f64).sqrt()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_gap).collect();
    let nonincreasing = rows.windows(2).all(|w| w[1].median_gap <= w[0].median_gap);
    Ok(GenGapReport {
        format_version: FORMAT_VERSION,
        fit: linear_fit(&xs, &ys),
        rows,
        nonincreasing,
    })
}
