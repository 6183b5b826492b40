//! Per-bucket layered filters.
//!
//! Layers alternate: odd layers hold the positives that are still in play,
//! even layers hold the negatives that slipped through the previous layer,
//! and the last layer is an exact table that settles whatever is left. On
//! the key sets used at build time classification is therefore exact.

use rustc_hash::FxHashSet;

use crate::bloom::{remix, BloomFilter};
use crate::bucket::BucketScheme;
use crate::error::{Error, Result};
use crate::groundtruth::PatternCatalog;
use crate::treeindex::CompactTrie;

/// Exact membership table closing a cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    keys: Vec<Vec<u8>>,
    holds_positives: bool,
}

impl LookupTable {
    pub fn new(mut keys: Vec<Vec<u8>>, holds_positives: bool) -> Self {
        keys.sort_unstable();
        keys.dedup();
        LookupTable { keys, holds_positives }
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.keys.binary_search_by(|k| k.as_slice().cmp(key)).is_ok()
    }

    pub fn holds_positives(&self) -> bool {
        self.holds_positives
    }

    pub fn keys(&self) -> &[Vec<u8>] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Entry count plus 2-byte length prefix per key.
    pub fn serialized_len(&self) -> usize {
        4 + self.keys.iter().map(|k| 2 + k.len()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredFilter {
    bucket_id: u32,
    f: f64,
    blooms: Vec<BloomFilter>,
    table: LookupTable,
}

/// Seed of layer `layer` (1-based) in bucket `bucket_id`.
pub fn layer_seed(master_seed: u64, bucket_id: u32, layer: u32) -> u64 {
    remix(master_seed ^ remix((u64::from(bucket_id) << 32) | u64::from(layer)))
}

impl LayeredFilter {
    /// Builds an `m`-layer cascade that accepts every key in `positives` and
    /// rejects every key in `negatives`.
    pub fn build(
        bucket_id: u32,
        positives: &[&[u8]],
        negatives: &[&[u8]],
        m: usize,
        f: f64,
        master_seed: u64,
    ) -> Result<Self> {
        if m < 2 || m > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!("layer count must be in [2, 255], got {m}")));
        }
        let pos_set: FxHashSet<&[u8]> = positives.iter().copied().collect();
        if negatives.iter().any(|k| pos_set.contains(k)) {
            return Err(Error::OverlappingKeys);
        }
        let mut pos: Vec<&[u8]> = positives.to_vec();
        let mut neg: Vec<&[u8]> = negatives.to_vec();
        let mut blooms = Vec::with_capacity(m - 1);
        for layer in 1..m as u32 {
            let seed = layer_seed(master_seed, bucket_id, layer);
            if layer % 2 == 1 {
                let bf = BloomFilter::from_keys(pos.iter().copied(), f, seed)?;
                neg.retain(|k| bf.contains(k));
                blooms.push(bf);
            } else {
                let bf = BloomFilter::from_keys(neg.iter().copied(), f, seed)?;
                pos.retain(|k| bf.contains(k));
                blooms.push(bf);
            }
        }
        let table = if m % 2 == 1 {
            LookupTable::new(pos.iter().map(|k| k.to_vec()).collect(), true)
        } else {
            LookupTable::new(neg.iter().map(|k| k.to_vec()).collect(), false)
        };
        Ok(LayeredFilter { bucket_id, f, blooms, table })
    }

    pub(crate) fn from_parts(bucket_id: u32, f: f64, blooms: Vec<BloomFilter>, table: LookupTable) -> Self {
        LayeredFilter { bucket_id, f, blooms, table }
    }

    pub fn bucket_id(&self) -> u32 {
        self.bucket_id
    }

    /// Total layers including the table.
    pub fn layers(&self) -> usize {
        self.blooms.len() + 1
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn blooms(&self) -> &[BloomFilter] {
        &self.blooms
    }

    pub fn table(&self) -> &LookupTable {
        &self.table
    }

    /// Whether `key` belongs to this bucket.
    pub fn classify_one(&self, key: &[u8]) -> bool {
        for (i, bf) in self.blooms.iter().enumerate() {
            if !bf.contains(key) {
                // layer i + 1: odd layers reject, even layers accept
                return i % 2 == 1;
            }
        }
        self.table.contains(key) == self.table.holds_positives
    }

    /// Bytes this filter occupies in a model file, excluding the per-bucket header.
    pub fn serialized_len(&self) -> usize {
        self.blooms.iter().map(BloomFilter::serialized_len).sum::<usize>() + self.table.serialized_len()
    }
}

/// Bucket id for `key`: the first filter (ascending bucket id) that accepts
/// it, then the tree index, then bucket 1.
pub fn classify(filters: &[LayeredFilter], trie: Option<&CompactTrie>, key: &[u8]) -> u32 {
    if let Some(f) = filters.iter().find(|f| f.classify_one(key)) {
        return f.bucket_id();
    }
    trie.and_then(|t| t.lookup(key)).unwrap_or(1)
}

/// Keys with no strict prefix among `keys`.
pub fn frontier<'a>(keys: &[&'a [u8]]) -> Vec<&'a [u8]> {
    let set: FxHashSet<&[u8]> = keys.iter().copied().collect();
    keys.iter().copied().filter(|k| !(1..k.len()).any(|cut| set.contains(&k[..cut]))).collect()
}

/// Catalog keys grouped by bucket.
#[derive(Debug, Clone)]
pub struct BucketedKeys<'a> {
    /// `by_bucket[i]` holds the keys of bucket `i + 1`, in catalog order.
    pub by_bucket: Vec<Vec<&'a [u8]>>,
    /// Frontier of bucket 1.
    pub frontier: Vec<&'a [u8]>,
}

impl<'a> BucketedKeys<'a> {
    pub fn new(catalog: &'a PatternCatalog, scheme: &BucketScheme) -> Result<Self> {
        let mut by_bucket: Vec<Vec<&[u8]>> = vec![Vec::new(); scheme.len()];
        for (key, card) in catalog.iter() {
            let id = scheme.bucket_of(card)?;
            by_bucket[id as usize - 1].push(key);
        }
        let frontier = frontier(&by_bucket[0]);
        Ok(BucketedKeys { by_bucket, frontier })
    }

    pub fn bucket(&self, id: u32) -> &[&'a [u8]] {
        &self.by_bucket[id as usize - 1]
    }

    pub fn n_buckets(&self) -> u32 {
        self.by_bucket.len() as u32
    }

    /// Number of negatives `collect_negatives` would return.
    pub fn negative_count(&self, i: u32, use_frontier: bool) -> usize {
        let b1 = if use_frontier { self.frontier.len() } else { self.by_bucket[0].len() };
        b1 + self.by_bucket[i as usize..].iter().map(Vec::len).sum::<usize>()
    }

    /// Negatives for bucket `i`: bucket 1 (or its frontier) and every bucket
    /// above `i`. Buckets between 2 and `i - 1` are probed earlier and never
    /// reach bucket `i`'s filter.
    pub fn collect_negatives(&self, i: u32, use_frontier: bool) -> Vec<&'a [u8]> {
        let b1 = if use_frontier { &self.frontier } else { &self.by_bucket[0] };
        let mut out = Vec::with_capacity(self.negative_count(i, use_frontier));
        out.extend_from_slice(b1);
        for keys in &self.by_bucket[i as usize..] {
            out.extend_from_slice(keys);
        }
        out
    }
}
