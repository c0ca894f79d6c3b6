//! Seed derivation and the deterministic generator used throughout.
//!
//! All randomness in the crate flows from a 64-bit base seed through
//! [`derive_seed`], so independent work items (trials, net points, power
//! iteration starts) get decorrelated streams that do not depend on
//! execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; used as a seed hash, not as a generator.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for work item `index` in stream `stream` from `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    base ^ splitmix64(stream.wrapping_mul(0x9e37_79b9).wrapping_add(index).wrapping_add(1))
}

/// Deterministic RNG for a derived seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fills `v` with uniform values in [-1, 1).
pub fn fill_uniform(rng: &mut ChaCha8Rng, v: &mut [f64]) {
    use rand::Rng;
    for x in v.iter_mut() {
        *x = rng.random_range(-1.0..1.0);
    }
}
