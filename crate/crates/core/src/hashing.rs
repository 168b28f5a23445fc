//! Hashing: one 64-bit hash per key, split into two 32-bit halves, extended
//! to `H` bucket choices by double hashing.
//!
//! Every table in this crate computes exactly one 64-bit hash per key per
//! operation. The hash is split into `h'` (low half) and `h''` (high half);
//! the `i`-th derived 32-bit function is `h' + i·h''` in wrapping arithmetic.

/// Both 32-bit halves of one 64-bit hash of a key.
///
/// `lo` is `h'`, `hi` is `h''`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashPair {
    pub lo: u32,
    pub hi: u32,
}

impl HashPair {
    #[inline]
    pub fn from_hash(h: u64) -> Self {
        HashPair {
            lo: h as u32,
            hi: (h >> 32) as u32,
        }
    }
}

/// Derive the `i`-th 32-bit hash function from a pair: `lo + i·hi` mod 2³².
///
/// All common table sizes are addressable with 32 bits (up to 2³² buckets),
/// so 32-bit derived values suffice for every table here.
#[inline]
pub fn derive(pair: HashPair, i: u32) -> u32 {
    pair.lo.wrapping_add(i.wrapping_mul(pair.hi))
}

/// A seeded family of derived hash functions.
#[derive(Debug, Clone, Copy)]
pub struct HashFamily {
    pub seed: u64,
    /// Number of derived functions (bucket choices), small constant ≥ 2.
    pub h: u32,
}

impl HashFamily {
    pub fn new(seed: u64, h: u32) -> Self {
        assert!(h >= 1, "at least one hash choice required");
        HashFamily { seed, h }
    }

    /// One 64-bit hash evaluation. Callers count this against their
    /// hash-evaluation budget.
    #[inline]
    pub fn pair(&self, key: u64) -> HashPair {
        HashPair::from_hash(hash64(key, self.seed))
    }

    #[inline]
    pub fn derive(&self, pair: HashPair, i: u32) -> u32 {
        debug_assert!(i < self.h, "choice index out of range");
        derive(pair, i)
    }
}

/// xxHash64 of a 64-bit key.
#[inline]
pub fn hash64(key: u64, seed: u64) -> u64 {
    xxh64(&key.to_le_bytes(), seed)
}

const PRIME1: u64 = 0x9E3779B185EBCA87;
const PRIME2: u64 = 0xC2B2AE3D27D4EB4F;
const PRIME3: u64 = 0x165667B19E3779F9;
const PRIME4: u64 = 0x85EBCA77C2B2AE63;
const PRIME5: u64 = 0x27D4EB2F165667C5;

#[inline]
fn round(acc: u64, input: u64) -> u64 {
    acc.wrapping_add(input.wrapping_mul(PRIME2))
        .rotate_left(31)
        .wrapping_mul(PRIME1)
}

#[inline]
fn merge_round(acc: u64, val: u64) -> u64 {
    (acc ^ round(0, val))
        .wrapping_mul(PRIME1)
        .wrapping_add(PRIME4)
}

#[inline]
fn read_u64(data: &[u8]) -> u64 {
    u64::from_le_bytes(data[..8].try_into().unwrap())
}

#[inline]
fn read_u32(data: &[u8]) -> u32 {
    u32::from_le_bytes(data[..4].try_into().unwrap())
}

/// xxHash64 over a byte slice. Used directly by the word-count benchmark to
/// pre-hash tokens to 64-bit keys.
pub fn xxh64(data: &[u8], seed: u64) -> u64 {
    let len = data.len();
    let mut input = data;
    let mut h: u64;

    if len >= 32 {
        let mut v1 = seed.wrapping_add(PRIME1).wrapping_add(PRIME2);
        let mut v2 = seed.wrapping_add(PRIME2);
        let mut v3 = seed;
        let mut v4 = seed.wrapping_sub(PRIME1);
        while input.len() >= 32 {
            v1 = round(v1, read_u64(input));
            v2 = round(v2, read_u64(&input[8..]));
            v3 = round(v3, read_u64(&input[16..]));
            v4 = round(v4, read_u64(&input[24..]));
            input = &input[32..];
        }
        h = v1
            .rotate_left(1)
            .wrapping_add(v2.rotate_left(7))
            .wrapping_add(v3.rotate_left(12))
            .wrapping_add(v4.rotate_left(18));
        h = merge_round(h, v1);
        h = merge_round(h, v2);
        h = merge_round(h, v3);
        h = merge_round(h, v4);
    } else {
        h = seed.wrapping_add(PRIME5);
    }

    h = h.wrapping_add(len as u64);

    while input.len() >= 8 {
        h ^= round(0, read_u64(input));
        h = h.rotate_left(27).wrapping_mul(PRIME1).wrapping_add(PRIME4);
        input = &input[8..];
    }
    if input.len() >= 4 {
        h ^= (read_u32(input) as u64).wrapping_mul(PRIME1);
        h = h.rotate_left(23).wrapping_mul(PRIME2).wrapping_add(PRIME3);
        input = &input[4..];
    }
    for &b in input {
        h ^= (b as u64).wrapping_mul(PRIME5);
        h = h.rotate_left(11).wrapping_mul(PRIME1);
    }

    h ^= h >> 33;
    h = h.wrapping_mul(PRIME2);
    h ^= h >> 29;
    h = h.wrapping_mul(PRIME3);
    h ^= h >> 32;
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn derive_zero_is_lo() {
        let p = HashPair { lo: 5, hi: 3 };
        assert_eq!(derive(p, 0), 5);
    }

    #[test]
    fn derive_hand_arithmetic() {
        // 5 + 2·3 = 11
        let p = HashPair { lo: 5, hi: 3 };
        assert_eq!(derive(p, 2), 11);
    }

    #[test]
    fn derive_wraps_mod_2_32() {
        let p = HashPair {
            lo: u32::MAX,
            hi: 1,
        };
        assert_eq!(derive(p, 1), 0);
    }

    #[test]
    fn hash64_deterministic() {
        for k in [0u64, 1, 42, u64::MAX] {
            assert_eq!(hash64(k, 0xDEADBEEF), hash64(k, 0xDEADBEEF));
        }
    }

    #[test]
    fn pair_is_exact_split() {
        let h = hash64(12345, 7);
        let p = HashPair::from_hash(h);
        assert_eq!(p.lo, h as u32);
        assert_eq!(p.hi, (h >> 32) as u32);
    }

    #[test]
    fn seeds_decorrelate_outputs() {
        // Different seeds must give different outputs for ≥99% of 10⁴ keys.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut same = 0u32;
        for _ in 0..10_000 {
            let k: u64 = rng.gen();
            if hash64(k, 17) == hash64(k, 18) {
                same += 1;
            }
        }
        assert!(same <= 100, "{same} seed collisions out of 10000");
    }

    #[test]
    fn avalanche() {
        // Flipping one input bit flips 32±8 output bits on average.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut total_flips = 0u64;
        let trials = 10_000;
        for _ in 0..trials {
            let k: u64 = rng.gen();
            let bit = rng.gen_range(0..64);
            let a = hash64(k, 0);
            let b = hash64(k ^ (1 << bit), 0);
            total_flips += (a ^ b).count_ones() as u64;
        }
        let mean = total_flips as f64 / trials as f64;
        assert!((24.0..=40.0).contains(&mean), "mean bit flips {mean}");
    }

    #[test]
    fn xxh64_reference_vectors() {
        // Cross-checked against the reference implementation.
        assert_eq!(xxh64(b"", 0), 0xEF46DB3751D8E999);
        assert_eq!(xxh64(b"abc", 0), 0x44BC2CF5AD770999);
    }

    proptest! {
        #[test]
        fn xxh64_matches_reference_crate(data: Vec<u8>, seed: u64) {
            prop_assert_eq!(xxh64(&data, seed), xxhash_rust::xxh64::xxh64(&data, seed));
        }

        #[test]
        fn derive_pure_in_pair(key: u64, seed: u64, i in 0u32..8) {
            let f = HashFamily::new(seed, 8);
            let p = f.pair(key);
            prop_assert_eq!(f.derive(p, i), derive(HashPair::from_hash(hash64(key, seed)), i));
        }
    }
}
