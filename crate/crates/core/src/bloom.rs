//! Bloom filters with double hashing over a keyed 64-bit hash.
//!
//! Probe `i` of key `x` is `h1 + i * h2 (mod n_bits)` where `h1` is the
//! seeded xxh3 hash of `x` and `h2` is an odd remix of it. Distinct seeds
//! give independent filters.

use std::f64::consts::LN_2;

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

/// Bits per key for target false-positive rate `f`.
pub fn bits_per_key(f: f64) -> f64 {
    -f.ln() / (LN_2 * LN_2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: Vec<u64>,
    n_bits: u32,
    k_hashes: u16,
    seed: u64,
}

impl BloomFilter {
    /// Filter for `capacity` keys at false-positive rate `f`.
    pub fn new(capacity: usize, f: f64, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("bloom capacity must be at least 1".into()));
        }
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidParameter(format!("false-positive rate must be in (0, 1), got {f}")));
        }
        let n_bits = (capacity as f64 * bits_per_key(f)).ceil();
        if n_bits > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!("bloom filter of {n_bits} bits is too large")));
        }
        let n_bits = (n_bits as u32).max(1);
        let k = ((n_bits as f64 / capacity as f64) * LN_2).round().clamp(1.0, u16::MAX as f64) as u16;
        Ok(BloomFilter { words: vec![0; (n_bits as usize).div_ceil(64)], n_bits, k_hashes: k, seed })
    }

    /// Degenerate filter that contains nothing.
    pub fn empty(seed: u64) -> Self {
        BloomFilter { words: Vec::new(), n_bits: 0, k_hashes: 0, seed }
    }

    pub(crate) fn from_parts(seed: u64, n_bits: u32, k_hashes: u16, words: Vec<u64>) -> Result<Self> {
        if words.len() != (n_bits as usize).div_ceil(64) {
            return Err(Error::Malformed("bloom word count does not match bit count".into()));
        }
        if (n_bits == 0) != (k_hashes == 0) {
            return Err(Error::Malformed("bloom filter with zero bits or zero hashes".into()));
        }
        Ok(BloomFilter { words, n_bits, k_hashes, seed })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn k_hashes(&self) -> u16 {
        self.k_hashes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_degenerate(&self) -> bool {
        self.n_bits == 0
    }

    #[inline]
    fn probes(&self, key: &[u8]) -> impl Iterator<Item = usize> {
        probe_positions(key, self.seed, self.n_bits, self.k_hashes)
    }

    /// Panics on a degenerate filter.
    pub fn insert(&mut self, key: &[u8]) {
        assert!(!self.is_degenerate(), "insert into a zero-capacity bloom filter");
        for bit in probe_positions(key, self.seed, self.n_bits, self.k_hashes) {
            self.words[bit >> 6] |= 1 << (bit & 63);
        }
    }

    #[inline]
    pub fn contains(&self, key: &[u8]) -> bool {
        if self.n_bits == 0 {
            return false;
        }
        self.probes(key).all(|bit| self.words[bit >> 6] & (1 << (bit & 63)) != 0)
    }

    /// Filter over `keys` sized exactly for them; degenerate when `keys` is empty.
    pub fn from_keys<'a>(keys: impl ExactSizeIterator<Item = &'a [u8]>, f: f64, seed: u64) -> Result<Self> {
        if keys.len() == 0 {
            return Ok(BloomFilter::empty(seed));
        }
        let mut bf = BloomFilter::new(keys.len(), f, seed)?;
        for k in keys {
            bf.insert(k);
        }
        Ok(bf)
    }

    /// Serialized size: seed, bit count, hash count and the bit words.
    pub fn serialized_len(&self) -> usize {
        8 + 4 + 2 + 8 * self.words.len()
    }
}

#[inline]
fn probe_positions(key: &[u8], seed: u64, n_bits: u32, k: u16) -> impl Iterator<Item = usize> {
    let h1 = xxh3_64_with_seed(key, seed);
    let h2 = remix(h1) | 1;
    let n = n_bits as u64;
    (0..k as u64).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % n) as usize)
}

/// splitmix64 finalizer.
#[inline]
pub(crate) fn remix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn key(i: u64) -> [u8; 8] {
        i.to_le_bytes()
    }

    #[test]
    fn sizing() {
        let bf = BloomFilter::new(1000, 0.01, 1).unwrap();
        assert_eq!(bf.n_bits(), 9586);
        assert_eq!(bf.k_hashes(), 7);
        let bf = BloomFilter::new(1, 0.5, 1).unwrap();
        assert_eq!((bf.n_bits(), bf.k_hashes()), (2, 1));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BloomFilter::new(0, 0.1, 0).is_err());
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(BloomFilter::new(10, f, 0).is_err());
        }
    }

    #[test]
    fn empty_contains_nothing() {
        let bf = BloomFilter::new(100, 0.01, 3).unwrap();
        assert!((0..1000).all(|i| !bf.contains(&key(i))));
        let d = BloomFilter::empty(3);
        assert!(!d.contains(b"x"));
        assert!(!d.contains(b""));
    }

    #[test]
    fn insert_then_contains() {
        let mut bf = BloomFilter::new(10, 0.01, 3).unwrap();
        bf.insert(b"hello");
        assert!(bf.contains(b"hello"));
    }

    #[test]
    fn fpr_calibrated() {
        for (f, seed) in [(0.01, 7u64), (0.05, 8)] {
            let n = 20_000u64;
            let bf = BloomFilter::from_keys((0..n).map(key).collect::<Vec<_>>().iter().map(|k| &k[..]), f, seed)
                .unwrap();
            let probes = 100_000u64;
            let fp = (n..n + probes).filter(|&i| bf.contains(&key(i))).count() as f64 / probes as f64;
            assert!(fp >= f / 2.0 && fp <= f * 2.0, "f={f} measured {fp}");
        }
    }

    // 2x2 contingency table of false-positive events for two seeds, chi-square
    // with one degree of freedom at alpha = 0.01 (critical value 6.635).
    #[test]
    fn seeds_independent() {
        let n = 5_000u64;
        let keys: Vec<[u8; 8]> = (0..n).map(key).collect();
        let a = BloomFilter::from_keys(keys.iter().map(|k| &k[..]), 0.1, 101).unwrap();
        let b = BloomFilter::from_keys(keys.iter().map(|k| &k[..]), 0.1, 202).unwrap();
        let mut table = [[0f64; 2]; 2];
        let probes = 100_000u64;
        for i in n..n + probes {
            let k = key(i);
            table[a.contains(&k) as usize][b.contains(&k) as usize] += 1.0;
        }
        let total = probes as f64;
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let mut chi2 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let expected = rows[r] * cols[c] / total;
                chi2 += (table[r][c] - expected).powi(2) / expected;
            }
        }
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn no_false_negatives_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut bf = BloomFilter::new(2_000, 0.02, 9).unwrap();
        let mut inserted: Vec<Vec<u8>> = Vec::new();
        for _ in 0..20_000 {
            if rng.random_bool(0.3) || inserted.is_empty() {
                let len = rng.random_range(0..12);
                let k: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                bf.insert(&k);
                inserted.push(k);
            } else {
                let k = &inserted[rng.random_range(0..inserted.len())];
                assert!(bf.contains(k));
            }
        }
    }

    proptest! {
        #[test]
        fn inserted_keys_always_found(keys in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..16), 1..200),
                                      f in 0.001f64..0.9, seed in any::<u64>()) {
            let bf = BloomFilter::from_keys(keys.iter().map(Vec::as_slice), f, seed).unwrap();
            for k in &keys {
                prop_assert!(bf.contains(k));
            }
        }
    }
}
