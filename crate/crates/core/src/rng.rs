//! Keyed random streams.
//!
//! Every random draw in the library comes from a stream identified by
//! `(seed, tag, index)`. Two streams with different keys are independent, and
//! the contents of a stream never depend on what other streams were consumed
//! before it, so results are stable under reordering of the calling code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the 64-bit key for `(seed, tag, index)`.
pub fn stream_key(seed: u64, tag: &str, index: u64) -> u64 {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ fnv1a(tag));
    splitmix64(b ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Open the random stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, tag, index))
}
