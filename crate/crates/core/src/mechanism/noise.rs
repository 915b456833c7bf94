use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{MechanismError, NoiseMode, NoiseModel};
use crate::ingest::{BinaryMatrix, BitGrid};

/// Stream-id domain for noise keys; other consumers of a master seed use
/// different domains through [`derive_seed`].
const NOISE_DOMAIN: u64 = 0x6e6f_6973_6520_6b65;

/// ChaCha words consumed per 64-column tile (one `u64` per bit).
const WORDS_PER_TILE: u128 = 128;

/// Generated noise plus the seed it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMatrix {
    pub bits: BitGrid,
    pub seed: u64,
}

/// Independent sub-seed of `master` for purpose `domain`.
pub fn derive_seed(master: u64, domain: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(domain);
    rng.next_u64()
}

fn noise_key(seed: u64) -> [u8; 32] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_DOMAIN);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    key
}

/// `P(u < threshold(x)) = x` for uniform 64-bit `u`.
fn threshold(x: f64) -> u64 {
    (x * 18_446_744_073_709_551_616.0) as u64
}

/// Draws a noise matrix. Each (row, 64-column tile) reads its own position of
/// a ChaCha8 keystream (stream = row, word offset = tile), so the result is a
/// pure function of `(model, shape, seed)` whatever the thread count.
pub fn sample_noise(
    model: &NoiseModel,
    rows: usize,
    bit_columns: usize,
    seed: u64,
) -> Result<NoiseMatrix, MechanismError> {
    if model.mode() == NoiseMode::Markov && model.stay_probs().len() + 1 != bit_columns.max(1) {
        return Err(MechanismError::Shape(format!(
            "chain has {} transitions for {bit_columns} bit columns",
            model.stay_probs().len()
        )));
    }
    let base = ChaCha8Rng::from_seed(noise_key(seed));
    let p_threshold = threshold(model.p());
    let stay: Vec<u64> = model.stay_probs().iter().map(|&q| threshold(q)).collect();
    let markov = model.mode() == NoiseMode::Markov;

    let mut bits = BitGrid::zeros(rows, bit_columns);
    bits.rows_mut().enumerate().for_each(|(row, words)| {
        let mut prev = false;
        for (tile, word) in words.iter_mut().enumerate() {
            let mut rng = base.clone();
            rng.set_stream(row as u64);
            rng.set_word_pos(tile as u128 * WORDS_PER_TILE);
            let start = tile * 64;
            let width = (bit_columns - start).min(64);
            let mut acc = 0u64;
            for b in 0..width {
                let c = start + b;
                let u = rng.next_u64();
                let bit = if markov && c > 0 {
                    if u < stay[c - 1] {
                        prev
                    } else {
                        !prev
                    }
                } else {
                    u < p_threshold
                };
                acc |= u64::from(bit) << b;
                prev = bit;
            }
            *word = acc;
        }
    });
    Ok(NoiseMatrix { bits, seed })
}

/// Elementwise exclusive-or of a matrix with noise of the same shape.
pub fn xor_apply(x: &BinaryMatrix, noise: &NoiseMatrix) -> Result<BinaryMatrix, MechanismError> {
    let mut bits = x.bits().clone();
    bits.xor_assign(&noise.bits).map_err(|e| MechanismError::Shape(e.to_string()))?;
    x.with_bits(bits).map_err(|e| MechanismError::Shape(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::Semantics;

    fn independent(p: f64) -> NoiseModel {
        NoiseModel::independent(p, Semantics::PerBit, 1).unwrap()
    }

    #[test]
    fn tiny_p_gives_empty_noise() {
        let n = sample_noise(&independent(1e-12), 1000, 1000, 3).unwrap();
        assert!(n.bits.count_ones() <= 1);
    }

    #[test]
    fn reproducible_from_seed() {
        let m = independent(0.3);
        let a = sample_noise(&m, 17, 200, 42).unwrap();
        let b = sample_noise(&m, 17, 200, 42).unwrap();
        let c = sample_noise(&m, 17, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.bits, c.bits);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let m = NoiseModel::markov(0.2, vec![0.8; 299]).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = single.install(|| sample_noise(&m, 64, 300, 9).unwrap());
        let b = many.install(|| sample_noise(&m, 64, 300, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rows_are_prefix_stable() {
        // a row's noise depends only on its index, not on the matrix height
        let m = independent(0.4);
        let small = sample_noise(&m, 3, 130, 5).unwrap();
        let big = sample_noise(&m, 10, 130, 5).unwrap();
        for r in 0..3 {
            assert_eq!(small.bits.row_words(r), big.bits.row_words(r));
        }
    }

    #[test]
    fn padding_stays_clear() {
        let n = sample_noise(&independent(0.5), 5, 70, 1).unwrap();
        for r in 0..5 {
            assert_eq!(n.bits.row_words(r)[1] >> 6, 0);
        }
    }

    #[test]
    fn chain_length_must_match() {
        let m = NoiseModel::markov(0.2, vec![0.8; 3]).unwrap();
        assert!(matches!(sample_noise(&m, 2, 5, 0), Err(MechanismError::Shape(_))));
    }

    #[test]
    fn xor_examples() {
        // three bits are not whole SNP pairs, so exercise the grid directly
        let mut x = BitGrid::zeros(1, 3);
        x.set(0, 0, true);
        x.set(0, 2, true);
        let mut n = BitGrid::zeros(1, 3);
        n.set(0, 0, true);
        n.set(0, 1, true);
        let mut out = x.clone();
        out.xor_assign(&n).unwrap();
        assert_eq!((0..3).map(|c| out.get(0, c)).collect::<Vec<_>>(), [false, true, true]);
        out.xor_assign(&n).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn xor_identity_and_mismatch() {
        let bm = BinaryMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["r1".into(), "r2".into()],
            sample_noise(&independent(0.5), 2, 4, 8).unwrap().bits,
        )
        .unwrap();
        let zero = NoiseMatrix { bits: BitGrid::zeros(2, 4), seed: 0 };
        assert_eq!(xor_apply(&bm, &zero).unwrap(), bm);
        let wrong = NoiseMatrix { bits: BitGrid::zeros(2, 6), seed: 0 };
        assert!(matches!(xor_apply(&bm, &wrong), Err(MechanismError::Shape(_))));
    }
}
