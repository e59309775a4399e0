//! Seeded random streams.
//!
//! Every source of randomness is a [`RngState`] derived from a run seed and a
//! tuple of stream ids, so independent stages never share a generator and a
//! fixed seed reproduces every draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngState = ChaCha8Rng;

pub fn seeded(seed: u64) -> RngState {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generator for the stream identified by `ids` under `seed`.
pub fn derive(seed: u64, ids: &[u64]) -> RngState {
    let mut h = splitmix(seed ^ 0x5afe_a0c0_0000_0001);
    for &id in ids {
        h = splitmix(h ^ splitmix(id.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Stable 64-bit tag for a stream name.
pub fn tag(name: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = derive(7, &[1, 2]).random();
        let b: u64 = derive(7, &[1, 2]).random();
        let c: u64 = derive(7, &[2, 1]).random();
        let d: u64 = derive(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
