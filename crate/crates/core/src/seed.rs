//! Deterministic seed derivation for parallel replicas.
//!
//! Every stochastic task draws its randomness from
//! `ChaCha8Rng::seed_from_u64(derive_seed(master, task_id))`, so results
//! depend only on `(master, task_id)` and never on worker count or
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The 64-bit finalizer of SplitMix64 (Stafford's "Mix13" constants).
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless splittable seed: `mix64(mix64(master ^ task_id.rotate_left(32)))`.
///
/// For a fixed master this is a bijection of `task_id`, so distinct tasks
/// never share a seed.
#[inline]
pub const fn derive_seed(master: u64, task_id: u64) -> u64 {
    mix64(mix64(master ^ task_id.rotate_left(32)))
}

/// The RNG every stochastic routine in this crate uses.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
