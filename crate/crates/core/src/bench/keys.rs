use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entry::EMPTY_KEY;
use crate::hashing::xxh64;

/// `count` distinct random 64-bit keys, none the sentinel.
pub fn key_stream(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count * 2);
    let mut keys = Vec::with_capacity(count);
    while keys.len() < count {
        let k = rng.gen::<u64>();
        if k != EMPTY_KEY && seen.insert(k) {
            keys.push(k);
        }
    }
    keys
}

/// Keys guaranteed absent from `present`, for unsuccessful-find workloads.
pub fn absent_keys(seed: u64, count: usize, present: &HashSet<u64>) -> Vec<u64> {
    let mut rng = SmallRng::seed_from_u64(seed ^ 0x0AB5_E4F1_0C2D_93E7);
    let mut keys = Vec::with_capacity(count);
    while keys.len() < count {
        let k = rng.gen::<u64>();
        if k != EMPTY_KEY && !present.contains(&k) {
            keys.push(k);
        }
    }
    keys
}

const TOKEN_SEED: u64 = 0x77C0_97D5_1234_ABCD;

/// Pre-hash a token to the 64-bit key space the tables operate on.
pub fn token_key(token: &[u8]) -> u64 {
    let h = xxh64(token, TOKEN_SEED);
    if h == EMPTY_KEY {
        0
    } else {
        h
    }
}

/// Stream a corpus, splitting on ASCII whitespace, and return one pre-hashed
/// key per token (duplicates preserved, in order).
pub fn read_corpus_keys(path: &Path) -> io::Result<Vec<u64>> {
    let file = File::open(path)?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut keys = Vec::new();
    let mut token: Vec<u8> = Vec::new();
    loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            break;
        }
        let len = buf.len();
        for &b in buf {
            if b.is_ascii_whitespace() {
                if !token.is_empty() {
                    keys.push(token_key(&token));
                    token.clear();
                }
            } else {
                token.push(b);
            }
        }
        reader.consume(len);
    }
    if !token.is_empty() {
        keys.push(token_key(&token));
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn key_stream_distinct_and_seeded() {
        let a = key_stream(5, 10_000);
        let b = key_stream(5, 10_000);
        let c = key_stream(6, 10_000);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let set: HashSet<u64> = a.iter().copied().collect();
        assert_eq!(set.len(), a.len());
        assert!(!set.contains(&EMPTY_KEY));
    }

    #[test]
    fn absent_keys_are_absent() {
        let present: HashSet<u64> = key_stream(1, 1000).into_iter().collect();
        for k in absent_keys(1, 1000, &present) {
            assert!(!present.contains(&k));
        }
    }

    #[test]
    fn tokenizer_counts() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "a b a\n\tc  a\r\n").unwrap();
        let keys = read_corpus_keys(f.path()).unwrap();
        assert_eq!(keys.len(), 5);
        assert_eq!(keys[0], keys[2]);
        assert_eq!(keys[0], keys[4]);
        assert_ne!(keys[0], keys[1]);
        assert_ne!(keys[0], keys[3]);
        assert_ne!(keys[1], keys[3]);
    }

    #[test]
    fn tokenizer_token_spanning_buffer_boundary() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let long = "x".repeat(3 << 20);
        write!(f, "start {long} end").unwrap();
        let keys = read_corpus_keys(f.path()).unwrap();
        assert_eq!(keys.len(), 3);
        assert_eq!(keys[1], token_key(long.as_bytes()));
    }
}
