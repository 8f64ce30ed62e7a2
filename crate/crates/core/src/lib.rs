//! Multi-class boosting by epoch-wise label elimination.
//!
//! Each epoch runs a multi-class AdaBoost variant over the current label
//! set until every observation has a label with negative score `Psi`, then
//! removes the same number of labels from every observation and re-indexes
//! the survivors. Training ends when one label is left. SAMME and binary
//! AdaBoost are included for comparison, along with an exact checker for
//! (iterative) weak learnability of a hypothesis pool.
//!
//! Labels are 0-based in memory and 1-based in every file format.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod eliminate;
pub mod epoch;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod game;
pub mod io;
pub mod learnability;
pub mod synth;
pub mod weak_learn;

pub use baselines::{adaboost_train, samme_train, Algorithm, SammeModel};
pub use data::{random_guess_score, score, Dataset, Distribution, FeatureMatrix, Label, LabelSet, ScoreTable};
pub use eliminate::{train, train_observed, EliminationStep, TrainConfig, TrainedModel};
pub use epoch::{compute_alpha, phi, run_epoch, EpochConfig, EpochRecord, RoundRecord};
pub use error::{BoostError, Result};
pub use exec::Execution;
pub use learnability::{game_value, iterative_weak_learnability, weak_learnability, GameValueReport, LabelingMode, Verdict};
pub use weak_learn::{PoolSpec, Stump, StumpPool};
