//! Deterministic RNG stream derivation.
//!
//! Every stochastic stage (weight init, per-epoch rotations, noise, missing
//! masks, validation expansion, dataset split) draws from its own ChaCha
//! stream derived from `(seed, purpose tag, indices...)`, so adding draws to
//! one stage never perturbs another and identical configs replay bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SPLIT: u64 = 1;
pub const TAG_NET_INIT: u64 = 2;
pub const TAG_IMPUTER_INIT: u64 = 3;
pub const TAG_EPOCH: u64 = 4;
pub const TAG_VALIDATION: u64 = 5;
pub const TAG_MASK: u64 = 6;
pub const TAG_SYNTH: u64 = 7;
pub const TAG_EVAL: u64 = 8;
pub const TAG_BENCH: u64 = 9;

/// splitmix64 finalizer; good avalanche, portable, no allocation.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha8 stream from a base seed and tag words.
pub fn derive(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mix(seed ^ 0x6c69_6674_3364_0001); // domain-separates from raw seed use
    for &t in tags {
        state = mix(state ^ t);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = mix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
