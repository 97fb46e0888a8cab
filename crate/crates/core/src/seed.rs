//! Splittable seeding.
//!
//! Every random stream is derived from one 64-bit master seed by folding a
//! path of indices through SplitMix64: `derive(master, &[band, room, utt])`.
//! Streams for different paths are independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the given index path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(master: u64, path: &[u64]) -> Rng {
    rng(derive(master, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_path_sensitive() {
        assert_ne!(derive(7, &[0, 1]), derive(7, &[1, 0]));
        assert_ne!(derive(7, &[0]), derive(8, &[0]));
        assert_eq!(derive(7, &[3, 4]), derive(7, &[3, 4]));
    }
}
