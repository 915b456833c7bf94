use serde::{Deserialize, Serialize};

use super::MechanismError;
use crate::ingest::BitGrid;

/// Clamp range for chain stay probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for QBounds {
    fn default() -> Self {
        Self { min: 0.5, max: 0.99 }
    }
}

impl QBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, MechanismError> {
        if !(min > 0.0 && min <= max && max < 1.0) {
            return Err(MechanismError::Config(format!("q bounds ({min}, {max}) must satisfy 0 < min <= max < 1")));
        }
        Ok(Self { min, max })
    }
}

/// Adjacent-column correlations of a public matrix and the stay
/// probabilities derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub correlations: Vec<f64>,
    pub stay_probs: Vec<f64>,
    pub bounds: QBounds,
}

/// `r_j` is the Pearson correlation of bit columns `j` and `j + 1` (0 when
/// either is constant), and `q_j = clamp((1 + |r_j|) / 2, min, max)`.
///
/// The input must be public data (a panel-derived or auxiliary matrix),
/// never the matrix being protected.
pub fn build_correlation_blocks(public_bits: &BitGrid, bounds: QBounds) -> BlockPlan {
    let cols = public_bits.cols();
    if cols < 2 {
        return BlockPlan { correlations: Vec::new(), stay_probs: Vec::new(), bounds };
    }
    let n = public_bits.rows() as f64;
    let mut ones = vec![0u64; cols];
    let mut both = vec![0u64; cols - 1];
    for r in 0..public_bits.rows() {
        let mut prev = false;
        for c in 0..cols {
            let bit = public_bits.get(r, c);
            if bit {
                ones[c] += 1;
                if c > 0 && prev {
                    both[c - 1] += 1;
                }
            }
            prev = bit;
        }
    }
    let correlations: Vec<f64> = (0..cols - 1)
        .map(|j| {
            let (sx, sy, sxy) = (ones[j] as f64, ones[j + 1] as f64, both[j] as f64);
            // binary columns: sum of squares equals sum
            let vx = n * sx - sx * sx;
            let vy = n * sy - sy * sy;
            if vx <= 0.0 || vy <= 0.0 {
                0.0
            } else {
                ((n * sxy - sx * sy) / (vx * vy).sqrt()).clamp(-1.0, 1.0)
            }
        })
        .collect();
    let stay_probs = correlations
        .iter()
        .map(|r| ((1.0 + r.abs()) / 2.0).clamp(bounds.min, bounds.max))
        .collect();
    BlockPlan { correlations, stay_probs, bounds }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identical_columns_hit_upper_bound() {
        let mut g = BitGrid::zeros(4, 2);
        for (r, b) in [true, false, true, true].into_iter().enumerate() {
            g.set(r, 0, b);
            g.set(r, 1, b);
        }
        let plan = build_correlation_blocks(&g, QBounds::default());
        assert!((plan.correlations[0] - 1.0).abs() < 1e-12);
        assert_eq!(plan.stay_probs, vec![0.99]);
    }

    #[test]
    fn constant_column_is_uncorrelated() {
        let mut g = BitGrid::zeros(3, 2);
        g.set(0, 0, true);
        let plan = build_correlation_blocks(&g, QBounds::default());
        assert_eq!(plan.correlations, vec![0.0]);
        assert_eq!(plan.stay_probs, vec![0.5]);
    }

    #[test]
    fn anticorrelation_maps_through_magnitude() {
        let mut g = BitGrid::zeros(2, 2);
        g.set(0, 0, true);
        g.set(1, 1, true);
        let plan = build_correlation_blocks(&g, QBounds::new(0.5, 0.9).unwrap());
        assert!((plan.correlations[0] + 1.0).abs() < 1e-12);
        assert_eq!(plan.stay_probs, vec![0.9]);
    }

    #[test]
    fn independent_columns_are_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g = BitGrid::zeros(20_000, 2);
        for r in 0..20_000 {
            g.set(r, 0, rng.gen_bool(0.3));
            g.set(r, 1, rng.gen_bool(0.6));
        }
        let plan = build_correlation_blocks(&g, QBounds::default());
        assert!(plan.correlations[0].abs() < 0.05, "{}", plan.correlations[0]);
        assert!((plan.stay_probs[0] - 0.5).abs() < 0.025);
    }

    #[test]
    fn narrow_input_gives_empty_plan() {
        let plan = build_correlation_blocks(&BitGrid::zeros(5, 1), QBounds::default());
        assert!(plan.correlations.is_empty() && plan.stay_probs.is_empty());
    }
}
