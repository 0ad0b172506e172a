//! Reproducible random streams.
//!
//! Every generator in the crate draws from a ChaCha8 stream keyed by a user
//! seed plus a stream id, so repetitions are independent of each other and of
//! the order (or thread) in which they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for a tuple of small integers (e.g. `[n, repetition]`).
pub fn stream_id(parts: &[u64]) -> u64 {
    // splitmix64 fold; distinct tuples give distinct-looking ids
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = h.wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 1).random()).collect();
        let mut r1 = stream(7, 1);
        let mut r2 = stream(7, 1);
        let mut r3 = stream(7, 2);
        let x: u64 = r1.random();
        assert_eq!(x, r2.random::<u64>());
        assert_ne!(x, r3.random::<u64>());
        assert!(a.iter().all(|&v| v == a[0]));
        assert_ne!(stream_id(&[128, 0]), stream_id(&[128, 1]));
        assert_ne!(stream_id(&[1, 0]), stream_id(&[0, 1]));
    }
}
