//! Deterministic seed handling for disorder realizations.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier of the position generator, echoed into run manifests.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.3/seed_from_u64+splitmix64-derivation";

/// Generator used for all position sampling.
pub type PositionRng = ChaCha20Rng;

pub fn position_rng(seed: u64) -> PositionRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `index` under `master`.
///
/// `mix64(master + (index + 1) * 0x9e3779b97f4a7c15)`: the `index`-th output of a
/// SplitMix64 stream started at `master`. Pure in its arguments, so scheduling
/// never changes which seed a realization receives.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
