//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a master seed together with a list of stream coordinates.
///
/// Distinct coordinate tuples give statistically independent seeds; the same
/// tuple always gives the same seed.
pub fn hash64(master: u64, parts: &[u64]) -> u64 {
    let mut h = mix(master.wrapping_add(GOLDEN));
    for (i, &p) in parts.iter().enumerate() {
        h = mix(h ^ p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2)));
    }
    h
}

/// Deterministic RNG for a derived stream.
pub fn rng_for(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(master, parts))
}

// Stream tags keep seeds for different purposes apart.
pub(crate) const STREAM_INPUTS: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;
pub(crate) const STREAM_ATOMS: u64 = 3;
pub(crate) const STREAM_COVER: u64 = 10;
pub(crate) const STREAM_EMBED_CONST: u64 = 11;
pub(crate) const STREAM_DISTORTION: u64 = 12;
pub(crate) const STREAM_FIT: u64 = 14;
pub(crate) const STREAM_TRIAL: u64 = 20;
pub(crate) const STREAM_TEST: u64 = 21;
