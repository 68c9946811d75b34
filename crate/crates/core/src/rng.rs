//! Deterministic randomness.
//!
//! All randomized operations take an explicit `u64` seed. Streams for
//! sub-tasks are derived by hashing the parent seed with a tag, so objects,
//! views, and restarts can be processed in any order (or in parallel) and
//! still reproduce bit-identical results. Counter-based helpers provide
//! order-independent sampling for per-point parallel loops.

use nalgebra::Vector3;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a cheap, well-mixed 64-bit permutation.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a parent seed and a context tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = mix64(seed ^ 0x5bf0_3635_d1a5_4e33);
    for b in tag.as_bytes() {
        h = mix64(h ^ u64::from(*b));
    }
    h
}

/// Derives a child seed from a parent seed and an index.
pub fn derive_seed_index(seed: u64, tag: &str, index: u64) -> u64 {
    mix64(derive_seed(seed, tag) ^ mix64(index))
}

/// Sequential RNG for a derived stream.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Counter-based uniform in [0, 1). Independent of evaluation order.
#[inline]
pub fn counter_uniform(seed: u64, counter: u64) -> f64 {
    let bits = mix64(seed ^ mix64(counter ^ 0x1234_5678_9abc_def0));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based uniform 3D point inside an axis-aligned cube.
#[inline]
pub fn counter_point_in_cube(seed: u64, counter: u64, min: f64, max: f64) -> Vector3<f64> {
    let side = max - min;
    Vector3::new(
        min + side * counter_uniform(seed, counter * 3),
        min + side * counter_uniform(seed, counter * 3 + 1),
        min + side * counter_uniform(seed, counter * 3 + 2),
    )
}
