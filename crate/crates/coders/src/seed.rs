//! Deterministic derivation of per-component RNG seeds from one master seed.
//!
//! Every stochastic component (weight init, epoch shuffling, jitter,
//! simulation draws, replicate seeds) owns an independent stream derived
//! from the master seed and a stream label. Streams stay stable no matter
//! how work is scheduled, so parallel runs reproduce serial runs exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step; a well-mixed bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stream label and an index.
pub fn derive(master: u64, label: &str, index: u64) -> u64 {
    let mut h = mix(master);
    for &b in label.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

/// A seeded RNG for the given stream. ChaCha keeps the stream identical
/// across platforms and rustc versions.
pub fn rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, label, index))
}
