//! Deterministic randomness plumbing.
//!
//! Every stochastic operation in this crate takes an explicit 64-bit seed and
//! derives its own sub-stream as `(seed, purpose tag, index)`. Two runs with
//! the same seeds are bit-for-bit identical regardless of thread count,
//! because sub-streams are derived arithmetically rather than drawn from a
//! shared mutable generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 output permutation. Good avalanche, cheap.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the sub-seed for (`master`, `purpose`, `index`).
///
/// The purpose tag keeps unrelated consumers of the same master seed out of
/// each other's streams; the index separates repetitions (trials, batches,
/// machines, ...).
pub fn sub_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325; // FNV-1a over the tag
    for b in purpose.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(mix64(master ^ h).wrapping_add(index))
}

/// Counter-based stream generator for (`master`, `purpose`, `index`).
pub fn stream(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, purpose, index))
}

/// Stateless uniform draw from `[0, bound)` keyed by an arbitrary tuple.
///
/// Used on hot paths (per layered-vertex walk choices) where constructing a
/// full generator per draw would dominate the run time. Bias from the modulo
/// is < bound / 2^64, far below anything our statistics can see.
#[inline]
pub fn keyed_uniform(seed: u64, a: u64, b: u64, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    mix64(seed ^ mix64(a).wrapping_add(b.rotate_left(17))) % bound
}
