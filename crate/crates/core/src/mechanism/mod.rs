//! XOR perturbation of binary genotype matrices.
//!
//! Noise is either independent Bernoulli(`p`) per bit (randomized response)
//! or a per-record chain across bit columns: the first bit is Bernoulli(`p`)
//! and bit `j + 1` repeats bit `j` with probability `q_j`, otherwise it is
//! the complement. For either mode the likelihood ratio of any output under
//! two neighbouring records is bounded by `max Q / min Q` over noise
//! patterns, which factorizes over the chain; see [`epsilon_upper_bound`].

mod accounting;
mod blocks;
mod noise;
mod verify;

pub use accounting::{
    budget_per_bit, calibrate_independent, calibrate_markov, epsilon_upper_bound,
    flip_probability, log_odds, transition_loss, DEFAULT_ALPHA,
};
pub use blocks::{build_correlation_blocks, BlockPlan, QBounds};
pub use noise::{derive_seed, sample_noise, xor_apply, NoiseMatrix};
pub use verify::{verify_dp_bruteforce, DpVerification, MAX_BRUTEFORCE_BITS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("size limit: {0}")]
    Size(String),
}

/// Granularity at which the privacy budget is spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Semantics {
    /// ε covers a whole record (one individual's row).
    PerRecord,
    /// ε covers a single bit of a record.
    PerBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub semantics: Semantics,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, semantics: Semantics) -> Result<Self, MechanismError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MechanismError::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon, semantics })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseMode {
    #[default]
    Independent,
    Markov,
}

/// Noise distribution plus its claimed ε bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoiseModel")]
pub struct NoiseModel {
    p: f64,
    mode: NoiseMode,
    stay_probs: Vec<f64>,
    epsilon_upper: f64,
    semantics: Semantics,
}

#[derive(Deserialize)]
struct RawNoiseModel {
    p: f64,
    mode: NoiseMode,
    #[serde(default)]
    stay_probs: Vec<f64>,
    epsilon_upper: f64,
    semantics: Semantics,
}

impl TryFrom<RawNoiseModel> for NoiseModel {
    type Error = MechanismError;

    fn try_from(raw: RawNoiseModel) -> Result<Self, Self::Error> {
        let model = NoiseModel {
            p: raw.p,
            mode: raw.mode,
            stay_probs: raw.stay_probs,
            epsilon_upper: raw.epsilon_upper,
            semantics: raw.semantics,
        };
        model.validate()?;
        Ok(model)
    }
}

impl NoiseModel {
    /// Independent Bernoulli(`p`) noise; the bound is computed for records of
    /// `bits_per_record` bits under `semantics`.
    pub fn independent(p: f64, semantics: Semantics, bits_per_record: usize) -> Result<Self, MechanismError> {
        let mut model = NoiseModel {
            p,
            mode: NoiseMode::Independent,
            stay_probs: Vec::new(),
            epsilon_upper: 0.0,
            semantics,
        };
        model.validate()?;
        model.epsilon_upper = epsilon_upper_bound(&model, bits_per_record);
        Ok(model)
    }

    /// Chain noise over `stay_probs.len() + 1` bit columns. Always accounted
    /// per record.
    pub fn markov(p: f64, stay_probs: Vec<f64>) -> Result<Self, MechanismError> {
        let mut model = NoiseModel {
            p,
            mode: NoiseMode::Markov,
            stay_probs,
            epsilon_upper: 0.0,
            semantics: Semantics::PerRecord,
        };
        model.validate()?;
        model.epsilon_upper = epsilon_upper_bound(&model, model.stay_probs.len() + 1);
        Ok(model)
    }

    fn validate(&self) -> Result<(), MechanismError> {
        if !(self.p > 0.0 && self.p <= 0.5) {
            return Err(MechanismError::Config(format!("flip probability {} outside (0, 0.5]", self.p)));
        }
        if let Some(q) = self.stay_probs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(MechanismError::Config(format!("stay probability {q} outside (0, 1)")));
        }
        if self.mode == NoiseMode::Independent && !self.stay_probs.is_empty() {
            return Err(MechanismError::Config("independent noise has no stay probabilities".into()));
        }
        if self.mode == NoiseMode::Markov && self.semantics != Semantics::PerRecord {
            return Err(MechanismError::Config("chain noise requires per-record accounting".into()));
        }
        if self.epsilon_upper.is_nan() || self.epsilon_upper < 0.0 {
            return Err(MechanismError::Config("epsilon_upper must be non-negative".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn stay_probs(&self) -> &[f64] {
        &self.stay_probs
    }

    pub fn epsilon_upper(&self) -> f64 {
        self.epsilon_upper
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    /// Probability that noise bit `c` is set, for each of `bit_columns`
    /// columns. Constant `p` for independent noise; for the chain,
    /// `m_{c+1} = q_c m_c + (1 - q_c)(1 - m_c)` from `m_0 = p`.
    pub fn column_flip_rates(&self, bit_columns: usize) -> Vec<f64> {
        let mut rates = Vec::with_capacity(bit_columns);
        let mut m = self.p;
        for c in 0..bit_columns {
            rates.push(m);
            if self.mode == NoiseMode::Markov {
                let q = self.stay_probs.get(c).copied().unwrap_or(0.5);
                m = q * m + (1.0 - q) * (1.0 - m);
            }
        }
        rates
    }
}

/// `{p, mode, stay_probs, epsilon_upper, seed}` as persisted next to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelDocument {
    #[serde(flatten)]
    pub model: NoiseModel,
    pub seed: u64,
}
