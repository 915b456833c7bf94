//! Utility loss between an original genotype matrix and its shared version.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GenotypeDataset, MISSING};
use crate::mechanism::Semantics;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("metrics need complete genotypes")]
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub avg_point_error: f64,
    pub avg_sample_error: f64,
    pub mean_error: f64,
    pub variance_error: f64,
    pub n: usize,
    pub m: usize,
    pub epsilon_claimed: f64,
    pub semantics: Semantics,
}

fn check(a: &GenotypeDataset, b: &GenotypeDataset) -> Result<(usize, usize), MetricsError> {
    if a.n() != b.n() || a.m() != b.m() {
        return Err(MetricsError::Shape(format!("{}x{} vs {}x{}", a.n(), a.m(), b.n(), b.m())));
    }
    if a.n() == 0 || a.m() == 0 {
        return Err(MetricsError::Shape("empty matrix".into()));
    }
    if a.has_missing() || b.has_missing() {
        return Err(MetricsError::Missing);
    }
    Ok((a.n(), a.m()))
}

/// Mean absolute genotype difference, scaled by the genotype range 2.
pub fn avg_point_error(g: &GenotypeDataset, shared: &GenotypeDataset) -> Result<f64, MetricsError> {
    let (n, m) = check(g, shared)?;
    let total: u64 = g
        .cells()
        .iter()
        .zip(shared.cells())
        .map(|(&a, &b)| u64::from(a.abs_diff(b)))
        .sum();
    Ok(total as f64 / (2.0 * (n * m) as f64))
}

/// Mean over samples of the fraction of SNPs whose genotype changed.
pub fn avg_sample_error(g: &GenotypeDataset, shared: &GenotypeDataset) -> Result<f64, MetricsError> {
    let (n, m) = check(g, shared)?;
    let per_row: f64 = g
        .rows()
        .zip(shared.rows())
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / m as f64)
        .sum();
    Ok(per_row / n as f64)
}

fn column_moments(ds: &GenotypeDataset) -> Vec<(f64, f64)> {
    let n = ds.n() as f64;
    let mut sum = vec![0.0; ds.m()];
    let mut sum_sq = vec![0.0; ds.m()];
    for row in ds.rows() {
        for (j, &g) in row.iter().enumerate() {
            debug_assert_ne!(g, MISSING);
            let g = f64::from(g);
            sum[j] += g;
            sum_sq[j] += g * g;
        }
    }
    sum.into_iter()
        .zip(sum_sq)
        .map(|(s, sq)| {
            let mean = s / n;
            (mean, (sq / n - mean * mean).max(0.0))
        })
        .collect()
}

/// Mean over SNPs of the absolute difference of column means.
pub fn mean_error(g: &GenotypeDataset, shared: &GenotypeDataset) -> Result<f64, MetricsError> {
    let (_, m) = check(g, shared)?;
    let total: f64 = column_moments(g)
        .iter()
        .zip(column_moments(shared))
        .map(|(a, b)| (a.0 - b.0).abs())
        .sum();
    Ok(total / m as f64)
}

/// Mean over SNPs of the absolute difference of population variances.
pub fn variance_error(g: &GenotypeDataset, shared: &GenotypeDataset) -> Result<f64, MetricsError> {
    let (_, m) = check(g, shared)?;
    let total: f64 = column_moments(g)
        .iter()
        .zip(column_moments(shared))
        .map(|(a, b)| (a.1 - b.1).abs())
        .sum();
    Ok(total / m as f64)
}

pub fn utility_report(
    g: &GenotypeDataset,
    shared: &GenotypeDataset,
    epsilon_claimed: f64,
    semantics: Semantics,
) -> Result<UtilityReport, MetricsError> {
    Ok(UtilityReport {
        avg_point_error: avg_point_error(g, shared)?,
        avg_sample_error: avg_sample_error(g, shared)?,
        mean_error: mean_error(g, shared)?,
        variance_error: variance_error(g, shared)?,
        n: g.n(),
        m: g.m(),
        epsilon_claimed,
        semantics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[u8]]) -> GenotypeDataset {
        GenotypeDataset::new(
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
            (0..rows[0].len()).map(|j| format!("r{j}")).collect(),
            rows.concat(),
        )
        .unwrap()
    }

    #[test]
    fn point_error_examples() {
        let a = ds(&[&[0, 2]]);
        assert_eq!(avg_point_error(&a, &a).unwrap(), 0.0);
        assert_eq!(avg_point_error(&ds(&[&[0]]), &ds(&[&[2]])).unwrap(), 1.0);
        assert_eq!(avg_point_error(&a, &ds(&[&[1, 2]])).unwrap(), 0.25);
    }

    #[test]
    fn sample_error_examples() {
        let a = ds(&[&[0, 2]]);
        assert_eq!(avg_sample_error(&a, &a).unwrap(), 0.0);
        assert_eq!(avg_sample_error(&a, &ds(&[&[1, 2]])).unwrap(), 0.5);
        let two = ds(&[&[0, 1], &[2, 2]]);
        assert_eq!(avg_sample_error(&two, &ds(&[&[0, 1], &[0, 0]])).unwrap(), 0.5);
    }

    #[test]
    fn mean_error_examples() {
        let a = ds(&[&[1], &[1]]);
        assert_eq!(mean_error(&a, &a).unwrap(), 0.0);
        assert_eq!(mean_error(&a, &ds(&[&[1], &[2]])).unwrap(), 0.5);
        let b = ds(&[&[0, 1], &[2, 0], &[1, 1]]);
        let permuted = ds(&[&[1, 1], &[0, 1], &[2, 0]]);
        assert_eq!(mean_error(&b, &permuted).unwrap(), 0.0);
    }

    #[test]
    fn variance_error_examples() {
        let a = ds(&[&[0], &[2]]);
        assert_eq!(variance_error(&a, &a).unwrap(), 0.0);
        assert_eq!(variance_error(&ds(&[&[1], &[1]]), &ds(&[&[2], &[2]])).unwrap(), 0.0);
        assert_eq!(variance_error(&a, &ds(&[&[1], &[1]])).unwrap(), 1.0);
    }

    #[test]
    fn shape_and_missing_errors() {
        let a = ds(&[&[0, 1]]);
        assert!(matches!(avg_point_error(&a, &ds(&[&[0]])), Err(MetricsError::Shape(_))));
        let holes = ds(&[&[0, MISSING]]);
        assert_eq!(mean_error(&a, &holes), Err(MetricsError::Missing));
    }
}
