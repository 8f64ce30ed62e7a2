//! Seeded synthetic datasets whose label regions stumps can peel apart.
//!
//! `interval`: one feature uniform on `[0, 1)`, label `floor(x m)`.
//! `regions`: two features uniform on the unit square, partitioned into
//! `m` axis-aligned rectangles of equal area by successive cuts, each cut
//! taking a slab off one side of the remaining box.
//!
//! Points closer than `margin` to a region boundary are rejected. The
//! layout comes from `ChaCha8` stream 0 of the seed, samples from the
//! stream passed to [`Generator::sample`].

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{contract, BoostError, Result};

pub const DEFAULT_MARGIN: f64 = 0.01;
const MAX_LABELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Interval,
    Regions,
}

impl FromStr for GeneratorKind {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(GeneratorKind::Interval),
            "regions" => Ok(GeneratorKind::Regions),
            other => contract(format!("unknown generator `{other}`; use `interval` or `regions`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cut {
    axis: usize,
    threshold: f64,
    /// Region lies where `x[axis] < threshold`.
    low_side: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    kind: GeneratorKind,
    num_labels: usize,
    margin: f64,
    cuts: Vec<Cut>,
}

impl Generator {
    pub fn new(kind: GeneratorKind, num_labels: usize, margin: f64, seed: u64) -> Result<Self> {
        if !(2..=MAX_LABELS).contains(&num_labels) {
            return contract(format!("generators support 2..={MAX_LABELS} labels, got {num_labels}"));
        }
        if !(0.0..0.1).contains(&margin) {
            return contract(format!("margin must lie in [0, 0.1), got {margin}"));
        }
        let cuts = match kind {
            GeneratorKind::Interval => (1..num_labels)
                .map(|k| Cut {
                    axis: 0,
                    threshold: k as f64 / num_labels as f64,
                    low_side: true,
                })
                .collect(),
            GeneratorKind::Regions => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut lo = [0.0f64; 2];
                let mut hi = [1.0f64; 2];
                let mut cuts = Vec::with_capacity(num_labels - 1);
                for a in 0..num_labels - 1 {
                    let axis = rng.gen_range(0..2);
                    let low_side = rng.gen_bool(0.5);
                    let share = (hi[axis] - lo[axis]) / (num_labels - a) as f64;
                    let threshold = if low_side { lo[axis] + share } else { hi[axis] - share };
                    if low_side {
                        lo[axis] = threshold;
                    } else {
                        hi[axis] = threshold;
                    }
                    cuts.push(Cut {
                        axis,
                        threshold,
                        low_side,
                    });
                }
                cuts
            }
        };
        Ok(Generator {
            kind,
            num_labels,
            margin,
            cuts,
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GeneratorKind::Interval => 1,
            GeneratorKind::Regions => 2,
        }
    }

    /// Label of `x` and its distance to the nearest boundary that matters.
    fn classify(&self, x: &[f64]) -> (Label, f64) {
        let mut slack = f64::INFINITY;
        for (a, cut) in self.cuts.iter().enumerate() {
            let v = x[cut.axis];
            slack = slack.min((v - cut.threshold).abs());
            if (v < cut.threshold) == cut.low_side {
                return (a, slack);
            }
        }
        (self.num_labels - 1, slack)
    }

    pub fn label_of(&self, x: &[f64]) -> Label {
        self.classify(x).0
    }

    /// Draw `n` points by rejection sampling.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        if n == 0 {
            return contract("sample size must be at least 1");
        }
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while rows.len() < n {
            attempts += 1;
            if attempts > 1000 * n + 1000 {
                return Err(BoostError::Numeric("rejection sampling made no progress".into()));
            }
            let x: Vec<f64> = (0..self.dim()).map(|_| rng.gen::<f64>()).collect();
            let (label, slack) = self.classify(&x);
            if slack >= self.margin {
                rows.push(x);
                labels.push(label);
            }
        }
        Dataset::from_rows(&rows, labels, self.num_labels)
    }
}

/// Sample-stream generator for a seed: stream 0 is reserved for layouts.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + 1);
    rng
}

/// `n` points from the named generator with the default margin.
pub fn synth(kind: GeneratorKind, num_labels: usize, n: usize, seed: u64) -> Result<Dataset> {
    Generator::new(kind, num_labels, DEFAULT_MARGIN, seed)?.sample(n, &mut sample_rng(seed, 0))
}
