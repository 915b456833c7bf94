//! Browser bindings for the genoshare demo page.
//!
//! Each export takes plain numbers and returns a JSON string. The work is
//! done by the `*_report` functions, which are ordinary Rust and tested
//! natively.

use genoshare::ingest::{self, GenotypeDataset};
use genoshare::mechanism::{self, verify_dp_bruteforce, DpVerification, NoiseModel, Semantics};
use genoshare::pipeline::{self, RunConfig};
use genoshare::{metrics, postprocess, synth};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Cells a single demo call may touch before the page would stall.
pub const MAX_CELLS: usize = 2_000_000;
const PREVIEW_MAX_ROWS: usize = 32;
const PREVIEW_MAX_SNPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoPoint {
    pub epsilon: f64,
    pub flip_probability: f64,
    /// Error of the decoded noisy matrix before restoration.
    pub raw_point_error: f64,
    pub avg_point_error: f64,
    pub mean_error: f64,
    pub attack_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePreview {
    pub flip_probability: f64,
    pub epsilon_upper: f64,
    pub flipped_fraction: f64,
    /// One string of `0`/`1` per sample for the encoded, noise and released bits.
    pub original: Vec<String>,
    pub noise: Vec<String>,
    pub released: Vec<String>,
}

fn check_size(samples: usize, snps: usize) -> Result<(), String> {
    if samples < 2 || snps == 0 {
        return Err("need at least 2 samples and 1 SNP".into());
    }
    if samples.saturating_mul(snps) > MAX_CELLS {
        return Err(format!("{samples}x{snps} exceeds the demo limit of {MAX_CELLS} cells"));
    }
    Ok(())
}

fn parse_semantics(s: &str) -> Result<Semantics, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| format!("unknown semantics {s:?}, expected PER_BIT or PER_RECORD"))
}

fn cohort(samples: usize, snps: usize, seed: u64) -> (genoshare::ReferencePanel, GenotypeDataset) {
    let panel = synth::synthetic_panel(snps, 0.01, seed);
    let ds = synth::panel_population(&panel, samples, seed.wrapping_add(1), "s");
    (panel, ds)
}

/// Release a simulated cohort at each epsilon and score it.
pub fn tradeoff_report(samples: usize, snps: usize, epsilons: &[f64], seed: u64) -> Result<Vec<DemoPoint>, String> {
    check_size(samples, snps)?;
    if epsilons.is_empty() {
        return Err("no epsilons given".into());
    }
    let (panel, original) = cohort(samples, snps, seed);
    let x = ingest::encode_binary(&original).map_err(|e| e.to_string())?;
    epsilons
        .iter()
        .map(|&epsilon| {
            let cfg = RunConfig::new("", "", epsilon, seed);
            cfg.validate().map_err(|e| e.to_string())?;
            let model = pipeline::calibrate(&cfg, Some(&panel), original.rsids(), x.bit_columns())
                .map_err(|e| e.to_string())?;
            let noise = mechanism::sample_noise(&model, x.rows(), x.bit_columns(), pipeline::noise_seed(seed))
                .map_err(|e| e.to_string())?;
            let y = mechanism::xor_apply(&x, &noise).map_err(|e| e.to_string())?;
            let restored = postprocess::restore(&y, &model, &panel, cfg.lambda).map_err(|e| e.to_string())?;
            let shared = ingest::decode_binary(&restored.matrix);
            let raw = ingest::decode_binary(&y);
            let attack = pipeline::membership_attack(&panel, &original, &shared, cfg.attack_trials, seed, epsilon)
                .map_err(|e| e.to_string())?;
            Ok(DemoPoint {
                epsilon,
                flip_probability: model.p(),
                raw_point_error: metrics::avg_point_error(&original, &raw).map_err(|e| e.to_string())?,
                avg_point_error: metrics::avg_point_error(&original, &shared).map_err(|e| e.to_string())?,
                mean_error: metrics::mean_error(&original, &shared).map_err(|e| e.to_string())?,
                attack_auc: attack.auc,
            })
        })
        .collect()
}

/// Exhaustive privacy check of a noise model on `bits`-bit records. An empty
/// `stay_probs` means independent flips.
pub fn verify_report(bits: usize, p: f64, stay_probs: &[f64]) -> Result<DpVerification, String> {
    let model = if stay_probs.is_empty() {
        NoiseModel::independent(p, Semantics::PerRecord, bits)
    } else {
        NoiseModel::markov(p, stay_probs.to_vec())
    }
    .map_err(|e| e.to_string())?;
    verify_dp_bruteforce(&model, bits).map_err(|e| e.to_string())
}

/// Encoded bits, noise and release for the first rows of a small cohort.
pub fn preview_report(
    epsilon: f64,
    semantics: &str,
    samples: usize,
    snps: usize,
    seed: u64,
) -> Result<NoisePreview, String> {
    check_size(samples, snps)?;
    if samples > PREVIEW_MAX_ROWS || snps > PREVIEW_MAX_SNPS {
        return Err(format!("preview is limited to {PREVIEW_MAX_ROWS} samples and {PREVIEW_MAX_SNPS} SNPs"));
    }
    let budget = mechanism::PrivacyBudget::new(epsilon, parse_semantics(semantics)?).map_err(|e| e.to_string())?;
    let (_, original) = cohort(samples, snps, seed);
    let x = ingest::encode_binary(&original).map_err(|e| e.to_string())?;
    let model = mechanism::calibrate_independent(&budget, x.bit_columns()).map_err(|e| e.to_string())?;
    let noise = mechanism::sample_noise(&model, x.rows(), x.bit_columns(), pipeline::noise_seed(seed))
        .map_err(|e| e.to_string())?;
    let y = mechanism::xor_apply(&x, &noise).map_err(|e| e.to_string())?;
    let rows = |get: &dyn Fn(usize, usize) -> bool| -> Vec<String> {
        (0..x.rows())
            .map(|r| (0..x.bit_columns()).map(|c| if get(r, c) { '1' } else { '0' }).collect())
            .collect()
    };
    Ok(NoisePreview {
        flip_probability: model.p(),
        epsilon_upper: model.epsilon_upper(),
        flipped_fraction: noise.bits.count_ones() as f64 / (x.rows() * x.bit_columns()) as f64,
        original: rows(&|r, c| x.get(r, c)),
        noise: rows(&|r, c| noise.bits.get(r, c)),
        released: rows(&|r, c| y.get(r, c)),
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn tradeoff_demo(samples: usize, snps: usize, epsilons: &[f64], seed: u32) -> Result<String, JsError> {
    to_js(tradeoff_report(samples, snps, epsilons, seed.into()))
}

#[wasm_bindgen]
pub fn verify_dp(bits: usize, p: f64, stay_probs: &[f64]) -> Result<String, JsError> {
    to_js(verify_report(bits, p, stay_probs))
}

#[wasm_bindgen]
pub fn noise_preview(epsilon: f64, semantics: &str, samples: usize, snps: usize, seed: u32) -> Result<String, JsError> {
    to_js(preview_report(epsilon, semantics, samples, snps, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semantics_names_match_the_api() {
        assert_eq!(parse_semantics("PER_BIT").unwrap(), Semantics::PerBit);
        assert_eq!(parse_semantics("PER_RECORD").unwrap(), Semantics::PerRecord);
        assert!(parse_semantics("per-bit").is_err());
    }

    #[test]
    fn sizes_are_bounded() {
        assert!(check_size(1, 10).is_err());
        assert!(check_size(10, 0).is_err());
        assert!(check_size(2000, 1001).is_err());
        assert!(check_size(2000, 1000).is_ok());
    }
}
