//! Exact enumeration of non-empty patterns and the brute-force oracle.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::pattern::{PatternKind, Query};
use crate::workload::{Workload, WorkloadSplit};

/// Every non-empty canonical pattern of length `<= max_len` with its exact
/// cardinality, sorted by body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternCatalog {
    kind: PatternKind,
    max_len: usize,
    dataset_size: u64,
    entries: Vec<(Vec<u8>, u64)>,
}

impl PatternCatalog {
    /// Counts matching rows (duplicates included) for every pattern body of
    /// length `1..=max_len` that occurs in `dataset`. A row contributes at
    /// most once to each pattern.
    pub fn enumerate<S: AsRef<[u8]>>(dataset: &[S], kind: PatternKind, max_len: usize) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if max_len == 0 {
            return Err(Error::InvalidParameter("max length must be at least 1".into()));
        }
        let mut counts: FxHashMap<Vec<u8>, u64> = FxHashMap::default();
        let mut bump = |key: &[u8]| match counts.get_mut(key) {
            Some(c) => *c += 1,
            None => {
                counts.insert(key.to_vec(), 1);
            }
        };
        let mut scratch: Vec<&[u8]> = Vec::new();
        let mut reversed = Vec::new();
        for row in dataset {
            let row = row.as_ref();
            match kind {
                PatternKind::Prefix => {
                    for len in 1..=row.len().min(max_len) {
                        bump(&row[..len]);
                    }
                }
                PatternKind::Suffix => {
                    reversed.clear();
                    reversed.extend(row.iter().rev());
                    for len in 1..=reversed.len().min(max_len) {
                        bump(&reversed[..len]);
                    }
                }
                PatternKind::Substring => {
                    scratch.clear();
                    for start in 0..row.len() {
                        for end in start + 1..=row.len().min(start + max_len) {
                            scratch.push(&row[start..end]);
                        }
                    }
                    scratch.sort_unstable();
                    scratch.dedup();
                    for key in &scratch {
                        bump(key);
                    }
                }
            }
        }
        let mut entries: Vec<(Vec<u8>, u64)> = counts.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(PatternCatalog { kind, max_len, dataset_size: dataset.len() as u64, entries })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dataset_size(&self) -> u64 {
        self.dataset_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, body: &[u8]) -> Option<u64> {
        self.entries.binary_search_by(|(k, _)| k.as_slice().cmp(body)).ok().map(|i| self.entries[i].1)
    }

    pub fn max_cardinality(&self) -> u64 {
        self.entries.iter().map(|e| e.1).max().unwrap_or(0)
    }

    /// `(canonical body, cardinality)` in body order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> + '_ {
        self.entries.iter().map(|(k, c)| (k.as_slice(), *c))
    }

    pub fn entry(&self, i: usize) -> (&[u8], u64) {
        let (k, c) = &self.entries[i];
        (k, *c)
    }

    pub fn query(&self, i: usize) -> Query {
        Query::from_canonical(self.kind, self.entries[i].0.clone()).expect("catalog bodies are non-empty")
    }

    /// True cardinality of a canonical body, using the catalog when the body
    /// is short enough for it to be complete and scanning otherwise.
    pub fn cardinality<S: AsRef<[u8]>>(&self, dataset: &[S], body: &[u8]) -> u64 {
        if body.len() <= self.max_len {
            self.get(body).unwrap_or(0)
        } else {
            let raw = self.kind.canonicalize(body);
            exact_cardinality(dataset, self.kind, &raw)
        }
    }
}

/// Brute-force count of rows matching the pattern with literal `raw`.
pub fn exact_cardinality<S: AsRef<[u8]>>(dataset: &[S], kind: PatternKind, raw: &[u8]) -> u64 {
    dataset.iter().filter(|row| kind.matches(row.as_ref(), raw)).count() as u64
}

pub fn exact_query_cardinality<S: AsRef<[u8]>>(dataset: &[S], query: &Query) -> u64 {
    exact_cardinality(dataset, query.kind(), &query.raw())
}

/// Reads a newline-delimited dataset. Only the `\n` terminator is stripped.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Vec<u8>>> {
    let bytes = fs::read(path)?;
    let mut rows: Vec<Vec<u8>> = bytes.split(|&b| b == b'\n').map(<[u8]>::to_vec).collect();
    if bytes.last() == Some(&b'\n') || bytes.is_empty() {
        rows.pop();
    }
    Ok(rows)
}

/// Bytes that occur anywhere in the dataset, ascending.
pub fn alphabet<S: AsRef<[u8]>>(dataset: &[S]) -> Vec<u8> {
    let mut seen = [false; 256];
    for row in dataset {
        for &b in row.as_ref() {
            seen[b as usize] = true;
        }
    }
    (0..=255u8).filter(|&b| seen[b as usize]).collect()
}

/// Samples `n_pos` distinct catalog patterns and builds `n_neg` distinct
/// empty-answer patterns by appending 1..=`max_extra` random alphabet bytes
/// to sampled catalog patterns.
pub fn gen_workload<S: AsRef<[u8]>>(
    catalog: &PatternCatalog,
    dataset: &[S],
    n_pos: usize,
    n_neg: usize,
    max_extra: usize,
    seed: u64,
) -> Result<Workload> {
    if catalog.is_empty() {
        return Err(Error::InvalidParameter("catalog is empty".into()));
    }
    if n_neg > 0 && max_extra == 0 {
        return Err(Error::InvalidParameter("max_extra must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = catalog.kind();
    let mut entries = Vec::with_capacity(n_pos + n_neg);

    let take = n_pos.min(catalog.len());
    for i in index::sample(&mut rng, catalog.len(), take).into_iter() {
        entries.push((catalog.query(i), catalog.entry(i).1));
    }

    let sigma = alphabet(dataset);
    let budget = n_neg.saturating_mul(10);
    let mut attempts = 0;
    let mut found: HashSet<Vec<u8>> = HashSet::new();
    while found.len() < n_neg {
        if attempts >= budget || sigma.is_empty() {
            return Err(Error::WorkloadExhausted { wanted: n_neg, attempts });
        }
        attempts += 1;
        let (base, _) = catalog.entry(rng.random_range(0..catalog.len()));
        let extra = rng.random_range(1..=max_extra);
        let mut body = base.to_vec();
        body.extend((0..extra).map(|_| sigma[rng.random_range(0..sigma.len())]));
        if found.contains(&body) || catalog.cardinality(dataset, &body) != 0 {
            continue;
        }
        found.insert(body.clone());
        entries.push((Query::from_canonical(kind, body)?, 0));
    }

    let split = if n_neg == 0 { WorkloadSplit::TrainEquivalent } else { WorkloadSplit::Test };
    Ok(Workload { kind, split, entries })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn as_map(c: &PatternCatalog) -> Vec<(String, u64)> {
        c.iter().map(|(k, v)| (String::from_utf8(k.to_vec()).unwrap(), v)).collect()
    }

    #[test]
    fn prefix_example() {
        let c = PatternCatalog::enumerate(&["aa", "ab", "ab"], PatternKind::Prefix, 2).unwrap();
        assert_eq!(as_map(&c), vec![("a".into(), 3), ("aa".into(), 1), ("ab".into(), 2)]);
        assert_eq!(c.dataset_size(), 3);
    }

    #[test]
    fn substring_example() {
        let c = PatternCatalog::enumerate(&["ab"], PatternKind::Substring, 2).unwrap();
        assert_eq!(as_map(&c), vec![("a".into(), 1), ("ab".into(), 1), ("b".into(), 1)]);
    }

    #[test]
    fn substring_counts_rows_not_occurrences() {
        let c = PatternCatalog::enumerate(&["aaaa", "ba"], PatternKind::Substring, 3).unwrap();
        assert_eq!(c.get(b"a"), Some(2));
        assert_eq!(c.get(b"aa"), Some(1));
        assert_eq!(c.get(b"aaaa"), None);
    }

    #[test]
    fn empty_dataset_rejected() {
        let empty: [&str; 0] = [];
        assert!(matches!(PatternCatalog::enumerate(&empty, PatternKind::Prefix, 2), Err(Error::EmptyDataset)));
    }

    #[test]
    fn exact_cardinality_examples() {
        assert_eq!(exact_cardinality(&["aa", "ab"], PatternKind::Prefix, b"a"), 2);
        assert_eq!(exact_cardinality(&["aa", "ab"], PatternKind::Substring, b"zz"), 0);
        assert_eq!(exact_cardinality(&["abc", "bcd", "cde"], PatternKind::Substring, b"bc"), 2);
        assert_eq!(exact_cardinality(&["abc", "xbc", "bcd"], PatternKind::Suffix, b"bc"), 2);
    }

    #[test]
    fn read_dataset_keeps_cr_and_empty_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        fs::write(&p, b"ab\r\n\ncd\n").unwrap();
        assert_eq!(read_dataset(&p).unwrap(), vec![b"ab\r".to_vec(), vec![], b"cd".to_vec()]);
        fs::write(&p, b"ab\ncd").unwrap();
        assert_eq!(read_dataset(&p).unwrap(), vec![b"ab".to_vec(), b"cd".to_vec()]);
    }

    fn words() -> Vec<&'static str> {
        "the quick brown fox jumps over the lazy dog while a quiet bird sings over the river bank"
            .split(' ')
            .collect()
    }

    #[test]
    fn workload_positive_only() {
        let d = words();
        let c = PatternCatalog::enumerate(&d, PatternKind::Substring, 4).unwrap();
        assert!(c.len() >= 100);
        let w = gen_workload(&c, &d, 50, 0, 3, 11).unwrap();
        assert_eq!(w.entries.len(), 50);
        assert_eq!(w.split, WorkloadSplit::TrainEquivalent);
        let distinct: HashSet<_> = w.entries.iter().map(|e| e.0.clone()).collect();
        assert_eq!(distinct.len(), 50);
        for (q, card) in &w.entries {
            assert_eq!(*card, exact_query_cardinality(&d, q));
        }
    }

    #[test]
    fn workload_negatives_are_empty() {
        let d = words();
        for kind in PatternKind::ALL {
            let c = PatternCatalog::enumerate(&d, kind, 4).unwrap();
            let w = gen_workload(&c, &d, 0, 10, 3, 5).unwrap();
            assert_eq!(w.entries.len(), 10);
            for (q, card) in &w.entries {
                assert_eq!(*card, 0);
                assert_eq!(exact_query_cardinality(&d, q), 0, "{q}");
            }
        }
    }

    #[test]
    fn workload_deterministic() {
        let d = words();
        let c = PatternCatalog::enumerate(&d, PatternKind::Prefix, 4).unwrap();
        let a = gen_workload(&c, &d, 20, 20, 3, 99).unwrap();
        let b = gen_workload(&c, &d, 20, 20, 3, 99).unwrap();
        assert_eq!(a, b);
        let c2 = gen_workload(&c, &d, 20, 20, 3, 100).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn workload_exhaustion() {
        // every string over {a} up to length 3 is present, so appending to "a" or "aa" never empties
        let d = ["a", "aa", "aaa", "aaaa", "aaaaa"];
        let c = PatternCatalog::enumerate(&d, PatternKind::Substring, 2).unwrap();
        let err = gen_workload(&c, &d, 0, 5, 1, 1).unwrap_err();
        assert!(matches!(err, Error::WorkloadExhausted { wanted: 5, attempts: 50 }));
    }

    #[test]
    fn skew_on_word_list() {
        let d: Vec<String> = (0..2000).map(|i| format!("w{}x{}", i % 37, i)).collect();
        let c = PatternCatalog::enumerate(&d, PatternKind::Substring, 6).unwrap();
        let b1 = c.iter().filter(|e| e.1 <= 2).count();
        assert!(b1 * 2 > c.len());
    }

    fn dataset_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(prop::sample::select(b"abc".to_vec()), 0..7), 1..12)
    }

    proptest! {
        #[test]
        fn catalog_agrees_with_oracle(d in dataset_strategy(), max_len in 1usize..5, k in 0usize..3) {
            let kind = PatternKind::ALL[k];
            let Ok(c) = PatternCatalog::enumerate(&d, kind, max_len) else { unreachable!() };
            let mut total = 0;
            for (body, card) in c.iter() {
                prop_assert!(card >= 1);
                prop_assert!(body.len() <= max_len);
                prop_assert_eq!(card, exact_cardinality(&d, kind, &kind.canonicalize(body)));
                for cut in 1..body.len() {
                    let parent = c.get(&body[..cut]);
                    prop_assert!(parent.is_some_and(|p| p >= card));
                }
                total += 1;
            }
            // completeness: every pattern over {a,b,c} up to max_len that matches something is present
            let mut frontier: Vec<Vec<u8>> = vec![vec![]];
            let mut seen = 0;
            for _ in 0..max_len {
                let mut next = Vec::new();
                for p in &frontier {
                    for &ch in b"abc" {
                        let mut q = p.clone();
                        q.push(ch);
                        if exact_cardinality(&d, kind, &kind.canonicalize(&q)) > 0 {
                            seen += 1;
                            next.push(q);
                        }
                    }
                }
                frontier = next;
            }
            prop_assert_eq!(seen, total);
        }

        #[test]
        fn suffix_is_prefix_of_reversed(d in dataset_strategy(), max_len in 1usize..5) {
            let reversed: Vec<Vec<u8>> = d.iter().map(|r| r.iter().rev().copied().collect()).collect();
            let s = PatternCatalog::enumerate(&d, PatternKind::Suffix, max_len).unwrap();
            let p = PatternCatalog::enumerate(&reversed, PatternKind::Prefix, max_len).unwrap();
            prop_assert_eq!(s.entries, p.entries);
        }
    }
}
