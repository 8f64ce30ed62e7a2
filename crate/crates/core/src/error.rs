use thiserror::Error;

pub type Result<T> = std::result::Result<T, BoostError>;

/// Every failure the library can report.
///
/// The variants fall into three families that the CLI maps onto exit codes:
/// input/contract problems, violations of the weak-learning assumption, and
/// internal/numeric faults.
#[derive(Debug, Error)]
pub enum BoostError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("label error at line {line}: {message}")]
    Label { line: u64, message: String },

    #[error("consistency error at line {line}: {message}")]
    Consistency { line: u64, message: String },

    #[error(
        "weak learnability violated{}: round {round} has epsilon {epsilon} >= {bound} for {labels} labels",
        epoch_suffix(*epoch)
    )]
    WeakLearnabilityViolation {
        epoch: Option<usize>,
        round: usize,
        epsilon: f64,
        bound: f64,
        labels: usize,
    },

    #[error(
        "epoch did not terminate{}: no stopping round within the cap of {round_cap} rounds",
        epoch_suffix(*epoch)
    )]
    EpochDivergence { epoch: Option<usize>, round_cap: usize },

    #[error("game solver did not converge: duality gap {gap:e} after {iterations} pivots")]
    Solver { gap: f64, iterations: usize },

    #[error("refused: {0}")]
    Guard(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn epoch_suffix(epoch: Option<usize>) -> String {
    match epoch {
        Some(e) => format!(" in epoch {e}"),
        None => String::new(),
    }
}

impl BoostError {
    /// Attach a 1-based epoch index to the errors raised inside an epoch.
    pub fn in_epoch(self, index: usize) -> Self {
        match self {
            BoostError::WeakLearnabilityViolation {
                round,
                epsilon,
                bound,
                labels,
                ..
            } => BoostError::WeakLearnabilityViolation {
                epoch: Some(index),
                round,
                epsilon,
                bound,
                labels,
            },
            BoostError::EpochDivergence { round_cap, .. } => BoostError::EpochDivergence {
                epoch: Some(index),
                round_cap,
            },
            other => other,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            BoostError::Contract(_) => "ContractViolation",
            BoostError::Format { .. } => "FormatError",
            BoostError::Label { .. } => "LabelError",
            BoostError::Consistency { .. } => "ConsistencyError",
            BoostError::WeakLearnabilityViolation { .. } => "WeakLearnabilityViolation",
            BoostError::EpochDivergence { .. } => "EpochDivergence",
            BoostError::Solver { .. } => "SolverError",
            BoostError::Guard(_) => "GuardRefusal",
            BoostError::Numeric(_) => "NumericFailure",
            BoostError::Model(_) => "ModelError",
            BoostError::Io(_) => "IoError",
        }
    }

    /// True for failures of the learning assumption rather than of the input.
    pub fn is_learnability_failure(&self) -> bool {
        matches!(
            self,
            BoostError::WeakLearnabilityViolation { .. } | BoostError::EpochDivergence { .. }
        )
    }
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(BoostError::Contract(msg.into()))
}
