//! Seed-stable RNG construction. All randomness in the library flows through
//! ChaCha12 streams keyed by a base seed plus fixed role tags, so results are
//! bitwise reproducible regardless of evaluation order across runs.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

/// Derive an independent named stream from a base seed.
///
/// The tags select the role (e.g. frame index, ensemble member); streams with
/// different tags are statistically independent.
pub(crate) fn substream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    for (slot, tag) in tags.iter().take(3).enumerate() {
        let start = 8 + slot * 8;
        key[start..start + 8].copy_from_slice(&tag.to_le_bytes());
    }
    // Mix any extra tags into the last word so long tag lists still work.
    if tags.len() > 3 {
        let mut acc: u64 = 0x9e37_79b9_7f4a_7c15;
        for t in &tags[3..] {
            acc = acc.wrapping_mul(0xbf58_476d_1ce4_e5b9) ^ t.rotate_left(17);
        }
        key[24..32].copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = substream(1, &[2, 3]).random();
        let b: f64 = substream(1, &[2, 3]).random();
        let c: f64 = substream(1, &[2, 4]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
