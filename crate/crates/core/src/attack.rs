//! Homer-style membership inference against released allele frequencies.
//!
//! For a target with dosages `t_j = g_j / 2` the statistic
//! `D = sum_j |t_j - ref_j| - |t_j - pool_j|` is positive when the target
//! sits closer to the released pool than to the reference population.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GenotypeDataset, MISSING};

pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("size error: {0}")]
    Size(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummaries {
    pub member: StatisticSummary,
    pub nonmember: StatisticSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub auc: f64,
    pub power_at_5pct_fpr: f64,
    pub trials: usize,
    pub epsilon: f64,
    pub statistic_summaries: StatisticSummaries,
}

/// Per-SNP minor-allele frequency with add-`smoothing` pseudo-counts.
pub fn allele_frequencies(ds: &GenotypeDataset, smoothing: f64) -> Result<Vec<f64>, AttackError> {
    if ds.n() == 0 || ds.m() == 0 {
        return Err(AttackError::Size("empty dataset".into()));
    }
    if ds.has_missing() {
        return Err(AttackError::Size("dataset has missing genotypes".into()));
    }
    let mut sums = vec![0u64; ds.m()];
    for row in ds.rows() {
        for (s, &g) in sums.iter_mut().zip(row) {
            *s += u64::from(g);
        }
    }
    let denom = 2.0 * ds.n() as f64 + 2.0 * smoothing;
    Ok(sums.into_iter().map(|s| (s as f64 + smoothing) / denom).collect())
}

/// Allele dosages `g / 2` of one sample. Missing calls are not allowed.
pub fn dosages(row: &[u8]) -> Vec<f64> {
    row.iter()
        .map(|&g| {
            debug_assert_ne!(g, MISSING);
            f64::from(g) / 2.0
        })
        .collect()
}

pub fn homer_statistic(target: &[f64], pool: &[f64], reference: &[f64]) -> Result<f64, AttackError> {
    if target.len() != pool.len() || pool.len() != reference.len() {
        return Err(AttackError::Shape(format!(
            "target {}, pool {}, reference {}",
            target.len(),
            pool.len(),
            reference.len()
        )));
    }
    Ok(target
        .iter()
        .zip(pool)
        .zip(reference)
        .map(|((t, p), r)| (t - r).abs() - (t - p).abs())
        .sum())
}

fn summarize(values: &[f64]) -> StatisticSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    StatisticSummary { mean, std_dev: var.sqrt() }
}

/// Area under the ROC curve by comparing every member/non-member pair
/// (ties count one half).
pub fn rank_auc(members: &[f64], nonmembers: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &m in members {
        for &o in nonmembers {
            if m > o {
                wins += 1.0;
            } else if m == o {
                wins += 0.5;
            }
        }
    }
    wins / (members.len() * nonmembers.len()) as f64
}

/// Fraction of members above the empirical 95th percentile (nearest rank)
/// of the non-member statistics.
pub fn power_at_fpr(members: &[f64], nonmembers: &[f64], fpr: f64) -> f64 {
    let mut sorted = nonmembers.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((1.0 - fpr) * sorted.len() as f64).ceil() as usize;
    let threshold = sorted[rank.clamp(1, sorted.len()) - 1];
    members.iter().filter(|&&d| d > threshold).count() as f64 / members.len() as f64
}

/// Scores every target against a released frequency vector `pool` and the
/// population `reference`, then summarizes how well `D` separates members
/// from non-members.
pub fn evaluate_attack(
    pool: &[f64],
    reference: &[f64],
    members: &[Vec<f64>],
    nonmembers: &[Vec<f64>],
    epsilon: f64,
) -> Result<AttackReport, AttackError> {
    if members.len() < 2 || nonmembers.len() < 2 {
        return Err(AttackError::Size(format!(
            "need at least 2 targets per class, got {} members and {} non-members",
            members.len(),
            nonmembers.len()
        )));
    }
    let score = |targets: &[Vec<f64>]| -> Result<Vec<f64>, AttackError> {
        targets.par_iter().map(|t| homer_statistic(t, pool, reference)).collect()
    };
    let member_d = score(members)?;
    let nonmember_d = score(nonmembers)?;
    Ok(AttackReport {
        auc: rank_auc(&member_d, &nonmember_d),
        power_at_5pct_fpr: power_at_fpr(&member_d, &nonmember_d, 0.05),
        trials: members.len() + nonmembers.len(),
        epsilon,
        statistic_summaries: StatisticSummaries {
            member: summarize(&member_d),
            nonmember: summarize(&nonmember_d),
        },
    })
}

/// Dosage vectors of every sample in `ds`.
pub fn targets(ds: &GenotypeDataset) -> Vec<Vec<f64>> {
    ds.rows().map(dosages).collect()
}
