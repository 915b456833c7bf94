//! Utility restoration of a perturbed matrix from public per-SNP statistics.
//!
//! [`restore`] only sees the perturbed matrix, the public noise parameters
//! and the public panel, so its output is post-processing of the DP release
//! and carries the same guarantee.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BinaryMatrix, BitGrid, ReferencePanel};
use crate::mechanism::NoiseModel;

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Flip rates at or above this carry no information about the input.
const NO_SIGNAL: f64 = 0.5 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("frequency is unidentifiable at flip probability {0}")]
    Undefined(f64),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Hardy-Weinberg priors for the two bits of one SNP.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnPrior {
    pub rsid: String,
    pub q1: f64,
    pub q2: f64,
    pub f: f64,
}

impl ColumnPrior {
    pub fn new(rsid: &str, f: f64) -> Self {
        let (q1, q2) = hwe_bit_priors(f);
        Self { rsid: rsid.to_owned(), q1, q2, f }
    }
}

/// `P(g >= 1) = 1 - (1-f)^2` and `P(g = 2) = f^2`.
pub fn hwe_bit_priors(f: f64) -> (f64, f64) {
    (1.0 - (1.0 - f) * (1.0 - f), f * f)
}

/// Inverts randomized response: the set-bit frequency that would produce
/// `observed_mean` after flipping with probability `p`.
pub fn debias_frequency(observed_mean: f64, p: f64) -> Result<f64, PostprocessError> {
    if p >= NO_SIGNAL {
        return Err(PostprocessError::Undefined(p));
    }
    Ok(((observed_mean - p) / (1.0 - 2.0 * p)).clamp(0.0, 1.0))
}

/// `P(x = 1 | y)` for prior `P(x = 1) = q` and flip probability `p`.
pub fn posterior_one(y_bit: bool, p: f64, q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return q;
    }
    let (hit, miss) = if y_bit { (1.0 - p, p) } else { (p, 1.0 - p) };
    hit * q / (hit * q + miss * (1.0 - q))
}

/// Restored matrix and the per-column counts it was matched to.
#[derive(Debug, Clone, PartialEq)]
pub struct Restored {
    pub matrix: BinaryMatrix,
    pub target_counts: Vec<usize>,
}

/// Compact description of a restoration for run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestoreSummary {
    pub lambda: f64,
    pub target_count_min: usize,
    pub target_count_max: usize,
    pub target_count_mean: f64,
    pub target_count_total: usize,
}

impl Restored {
    pub fn summary(&self, lambda: f64) -> RestoreSummary {
        let total: usize = self.target_counts.iter().sum();
        RestoreSummary {
            lambda,
            target_count_min: self.target_counts.iter().copied().min().unwrap_or(0),
            target_count_max: self.target_counts.iter().copied().max().unwrap_or(0),
            target_count_mean: if self.target_counts.is_empty() {
                0.0
            } else {
                total as f64 / self.target_counts.len() as f64
            },
            target_count_total: total,
        }
    }
}

/// Per bit column, moves the observed set-bit count to a target count and
/// chooses which cells are set by posterior probability.
///
/// The target frequency blends the debiased column mean with the public
/// prior, `lambda * debiased + (1 - lambda) * prior`; when the column's noise
/// carries no signal the prior alone is used. The `round(n * target)` cells
/// ranked highest by (posterior desc, observed bit desc, row asc) are set.
pub fn restore(
    y: &BinaryMatrix,
    model: &NoiseModel,
    panel: &ReferencePanel,
    lambda: f64,
) -> Result<Restored, PostprocessError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PostprocessError::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    let mafs = panel.mafs_for(y.rsids()).map_err(|e| PostprocessError::Alignment(e.to_string()))?;
    let n = y.rows();
    let rates = model.column_flip_rates(y.bit_columns());

    let columns: Vec<(usize, Vec<usize>)> = (0..y.bit_columns())
        .into_par_iter()
        .map(|c| {
            let (q1, q2) = hwe_bit_priors(mafs[c / 2]);
            let prior = if c % 2 == 0 { q1 } else { q2 };
            let p = rates[c];
            let observed: Vec<bool> = (0..n).map(|r| y.get(r, c)).collect();
            let target_freq = match debias_frequency(count(&observed) as f64 / n.max(1) as f64, p) {
                Ok(debiased) => lambda * debiased + (1.0 - lambda) * prior,
                Err(_) => prior,
            };
            let target = ((n as f64 * target_freq).round() as usize).min(n);

            let post = [posterior_one(false, p, prior), posterior_one(true, p, prior)];
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                let (ya, yb) = (observed[a], observed[b]);
                post[usize::from(yb)]
                    .total_cmp(&post[usize::from(ya)])
                    .then(yb.cmp(&ya))
                    .then(a.cmp(&b))
            });
            order.truncate(target);
            (target, order)
        })
        .collect();

    let mut bits = BitGrid::zeros(n, y.bit_columns());
    let mut target_counts = Vec::with_capacity(columns.len());
    for (c, (target, rows)) in columns.into_iter().enumerate() {
        for r in rows {
            bits.set(r, c, true);
        }
        target_counts.push(target);
    }
    let matrix = y.with_bits(bits).map_err(|e| PostprocessError::Alignment(e.to_string()))?;
    Ok(Restored { matrix, target_counts })
}

fn count(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}
