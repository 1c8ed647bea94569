//! Deterministic per-replicate random streams.
//!
//! Each logical stream (replicate, grid node, ...) gets an independent
//! counter-based ChaCha generator whose 256-bit seed is derived from the
//! master seed and the stream coordinates via splitmix64. Streams are
//! independent of worker count and evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG from a master seed and stream coordinates.
pub fn derive_stream(master_seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = master_seed ^ 0x6a09_e667_f3bc_c908;
    let mut mixed = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17);
        mixed ^= splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    let mut s = mixed;
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
