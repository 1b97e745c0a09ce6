//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! keyed by `(seed, stream, index)` so results do not depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Stream tags, so that two subsystems sharing a seed never share draws.
pub mod stream {
    pub const SYNTH_SOURCE: u64 = 1;
    pub const SYNTH_SHIFT: u64 = 2;
    pub const BATCHES: u64 = 3;
    pub const STICKER_SPEC: u64 = 4;
    pub const STICKER_TEXTURE: u64 = 5;
    pub const GLYPH_SUBSET: u64 = 6;
    pub const OOS: u64 = 7;
    pub const MODEL_INIT: u64 = 8;
    pub const PROBE: u64 = 9;
    pub const PRETEXT: u64 = 10;
    pub const TRAIN: u64 = 11;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = rng_for(7, 1, 0).random();
        let b: u64 = rng_for(7, 1, 0).random();
        let c: u64 = rng_for(7, 2, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
