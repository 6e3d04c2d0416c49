//! Counter-based keyed random numbers.
//!
//! A draw is a pure function of `(seed, stream, coordinates)`: the key is
//! folded through the SplitMix64 finalizer one word at a time. Site-level
//! environment draws never depend on evaluation order, so kernels regenerate
//! the environment on the fly and replicas run in any order.

/// Stream id for environment disorder draws.
pub const STREAM_ENVIRONMENT: u64 = 0x454e_5649;
/// Stream id for per-replica seeds split from a master seed.
pub const STREAM_REPLICA: u64 = 0x5245_504c;
/// Stream id for walk trajectories.
pub const STREAM_WALK: u64 = 0x5741_4c4b;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes `(seed, stream, words...)` into one 64-bit value.
#[inline]
pub fn keyed_hash(seed: u64, stream: u64, words: &[i64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream));
    for &w in words {
        h = splitmix64(h ^ (w as u64));
    }
    h
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of the `index`-th task derived from a master seed:
/// `splitmix64(master ^ splitmix64(STREAM_REPLICA + index))`.
#[inline]
pub fn task_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(STREAM_REPLICA.wrapping_add(index)))
}
