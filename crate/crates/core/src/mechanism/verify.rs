use serde::{Deserialize, Serialize};

use super::{epsilon_upper_bound, MechanismError, NoiseMode, NoiseModel, Semantics};

pub const MAX_BRUTEFORCE_BITS: usize = 12;

/// Outcome of exhaustively checking a noise model on short records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpVerification {
    pub bits: usize,
    pub max_ratio: f64,
    pub epsilon_observed: f64,
    pub epsilon_upper: f64,
    pub passes: bool,
}

/// Probability of each noise pattern over `bits` columns, computed straight
/// from the sampling process (bit `c` of the index is column `c`).
fn pattern_probabilities(model: &NoiseModel, bits: usize) -> Vec<f64> {
    let p = model.p();
    (0..1usize << bits)
        .map(|pattern| {
            let bit = |c: usize| pattern >> c & 1 == 1;
            let mut prob = if bit(0) { p } else { 1.0 - p };
            for c in 1..bits {
                prob *= match model.mode() {
                    NoiseMode::Independent => {
                        if bit(c) {
                            p
                        } else {
                            1.0 - p
                        }
                    }
                    NoiseMode::Markov => {
                        let q = model.stay_probs()[c - 1];
                        if bit(c) == bit(c - 1) {
                            q
                        } else {
                            1.0 - q
                        }
                    }
                };
            }
            prob
        })
        .collect()
}

/// Enumerates every output `y` and every pair of neighbouring records
/// `(x, x')` on `bits`-bit records and reports the worst likelihood ratio
/// `P(y | x) / P(y | x')` against the model's claimed bound.
///
/// Neighbours are any two records under per-record accounting and records
/// differing in a single bit under per-bit accounting.
pub fn verify_dp_bruteforce(model: &NoiseModel, bits: usize) -> Result<DpVerification, MechanismError> {
    if bits == 0 || bits > MAX_BRUTEFORCE_BITS {
        return Err(MechanismError::Size(format!(
            "brute force needs 1..={MAX_BRUTEFORCE_BITS} bits, got {bits}"
        )));
    }
    if model.mode() == NoiseMode::Markov && model.stay_probs().len() < bits - 1 {
        return Err(MechanismError::Shape(format!(
            "chain has {} transitions, {bits} bits need {}",
            model.stay_probs().len(),
            bits - 1
        )));
    }
    let q = pattern_probabilities(model, bits);
    let size = 1usize << bits;
    let mut max_ratio = 1.0_f64;
    for y in 0..size {
        match model.semantics() {
            Semantics::PerRecord => {
                let (mut hi, mut lo) = (0.0_f64, f64::INFINITY);
                for x in 0..size {
                    let likelihood = q[y ^ x];
                    hi = hi.max(likelihood);
                    lo = lo.min(likelihood);
                }
                max_ratio = max_ratio.max(hi / lo);
            }
            Semantics::PerBit => {
                for x in 0..size {
                    for k in 0..bits {
                        let neighbour = x ^ (1 << k);
                        max_ratio = max_ratio.max(q[y ^ x] / q[y ^ neighbour]);
                    }
                }
            }
        }
    }
    let epsilon_observed = max_ratio.ln();
    let epsilon_upper = epsilon_upper_bound(model, bits);
    Ok(DpVerification {
        bits,
        max_ratio,
        epsilon_observed,
        epsilon_upper,
        passes: epsilon_observed <= epsilon_upper + 1e-9,
    })
}
