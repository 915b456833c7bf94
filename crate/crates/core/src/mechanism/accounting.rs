use super::{BlockPlan, MechanismError, NoiseMode, NoiseModel, PrivacyBudget, Semantics};

/// Default share of the per-record budget the chain transitions may spend.
pub const DEFAULT_ALPHA: f64 = 0.5;

pub fn budget_per_bit(budget: &PrivacyBudget, bits_per_record: usize) -> f64 {
    match budget.semantics {
        Semantics::PerBit => budget.epsilon,
        Semantics::PerRecord => budget.epsilon / bits_per_record.max(1) as f64,
    }
}

/// Randomized-response flip probability `1 / (1 + e^ε)`.
pub fn flip_probability(epsilon_bit: f64) -> f64 {
    1.0 / (1.0 + epsilon_bit.exp())
}

/// `ln((1 - p) / p)`, accurate for `p` close to 0.5.
pub fn log_odds(p: f64) -> f64 {
    ((1.0 - 2.0 * p) / p).ln_1p()
}

/// Privacy loss of one chain transition, `ln(max(q, 1-q) / min(q, 1-q))`.
pub fn transition_loss(q: f64) -> f64 {
    let hi = q.max(1.0 - q);
    let lo = q.min(1.0 - q);
    ((hi - lo) / lo).ln_1p()
}

/// ε bound of `model` for records of `bits_per_record` bits.
///
/// Independent noise costs `ln((1-p)/p)` per bit, multiplied by the record
/// width under per-record accounting. Chain noise costs the first bit's log
/// odds plus one transition loss per adjacent pair.
pub fn epsilon_upper_bound(model: &NoiseModel, bits_per_record: usize) -> f64 {
    let first = log_odds(model.p());
    match (model.mode(), model.semantics()) {
        (NoiseMode::Independent, Semantics::PerBit) => first,
        (NoiseMode::Independent, Semantics::PerRecord) => bits_per_record as f64 * first,
        (NoiseMode::Markov, _) => {
            let transitions = bits_per_record.saturating_sub(1).min(model.stay_probs().len());
            first + model.stay_probs()[..transitions].iter().map(|&q| transition_loss(q)).sum::<f64>()
        }
    }
}

pub fn calibrate_independent(
    budget: &PrivacyBudget,
    bits_per_record: usize,
) -> Result<NoiseModel, MechanismError> {
    if bits_per_record == 0 {
        return Err(MechanismError::Config("records must have at least one bit".into()));
    }
    let p = flip_probability(budget_per_bit(budget, bits_per_record));
    NoiseModel::independent(p, budget.semantics, bits_per_record)
}

/// Splits a per-record budget between chain transitions (at most
/// `alpha * ε`) and the first bit. Stay probabilities demanding more than
/// that are shrunk toward 0.5 by a common factor until the transition loss
/// equals `alpha * ε`.
pub fn calibrate_markov(
    budget: &PrivacyBudget,
    plan: &BlockPlan,
    bits_per_record: usize,
    alpha: f64,
) -> Result<NoiseModel, MechanismError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MechanismError::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if budget.semantics != Semantics::PerRecord {
        return Err(MechanismError::Config("chain noise requires per-record accounting".into()));
    }
    if bits_per_record == 0 || plan.stay_probs.len() != bits_per_record - 1 {
        return Err(MechanismError::Shape(format!(
            "plan has {} transitions for {bits_per_record} bits",
            plan.stay_probs.len()
        )));
    }

    let allowance = alpha * budget.epsilon;
    let loss_at = |scale: f64| -> f64 {
        plan.stay_probs.iter().map(|&q| transition_loss(shrink(q, scale))).sum()
    };
    let scale = if loss_at(1.0) <= allowance {
        1.0
    } else {
        // loss is increasing in scale; keep the lower end so the allowance holds
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if loss_at(mid) <= allowance {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let stay_probs: Vec<f64> = plan.stay_probs.iter().map(|&q| shrink(q, scale)).collect();
    let transition: f64 = stay_probs.iter().map(|&q| transition_loss(q)).sum();
    let marginal = budget.epsilon - transition;
    let p = flip_probability(marginal);
    NoiseModel::markov(p, stay_probs)
}

fn shrink(q: f64, scale: f64) -> f64 {
    let q = q.max(1.0 - q);
    0.5 + scale * (q - 0.5)
}
