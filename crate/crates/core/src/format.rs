//! Model file format, little-endian throughout:
//!
//! ```text
//! magic "LRNT" | version u16 = 1 | kind u8 | eb f64 | max_len u16
//! | p_n flag u8, p_n f64 | dataset_size u64 | master_seed u64
//! | bucket count u16 | tree threshold u16
//! | for each bucket 2..=threshold:
//! |     m u8 (0 = empty bucket, nothing follows) | f f64
//! |     m - 1 bloom filters: seed u64, n_bits u32, k u16, ceil(n_bits / 64) words u64
//! |     table: count u32, then per key: len u16, bytes
//! | tree flag u8 [| node count u16, nodes u32 ...]
//! | companion flag u8 [| length u64, embedded model file]
//! | xxh3-64 checksum of everything above
//! ```

use std::fs;
use std::path::Path;

use xxhash_rust::xxh3::xxh3_64;

use crate::bloom::BloomFilter;
use crate::bucket::BucketScheme;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::estimator::EstimatorModel;
use crate::layered::{LayeredFilter, LookupTable};
use crate::pattern::PatternKind;
use crate::treeindex::CompactTrie;

pub const MAGIC: &[u8; 4] = b"LRNT";
pub const VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Malformed(msg.into())
}

impl EstimatorModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u8(self.kind.to_byte());
        w.f64(self.config.eb);
        w.u16(self.config.max_len as u16);
        w.u8(u8::from(self.config.p_n.is_some()));
        w.f64(self.config.p_n.unwrap_or(0.0));
        w.u64(self.dataset_size);
        w.u64(self.master_seed);
        w.u16(self.scheme.len() as u16);
        w.u16(self.tau as u16);

        let mut filters = self.filters.iter().peekable();
        for id in 2..=self.tau {
            match filters.next_if(|f| f.bucket_id() == id) {
                None => w.u8(0),
                Some(f) => {
                    w.u8(f.layers() as u8);
                    w.f64(f.f());
                    for bf in f.blooms() {
                        w.u64(bf.seed());
                        w.u32(bf.n_bits());
                        w.u16(bf.k_hashes());
                        for &word in bf.words() {
                            w.u64(word);
                        }
                    }
                    let table = f.table();
                    w.u32(table.len() as u32);
                    for key in table.keys() {
                        w.u16(key.len() as u16);
                        w.0.extend_from_slice(key);
                    }
                }
            }
        }

        match &self.trie {
            None => w.u8(0),
            Some(t) => {
                w.u8(1);
                w.u16(t.node_count() as u16);
                for &node in t.nodes() {
                    w.u32(node);
                }
            }
        }
        match &self.companion {
            None => w.u8(0),
            Some(c) => {
                w.u8(1);
                let bytes = c.to_bytes();
                w.u64(bytes.len() as u64);
                w.0.extend_from_slice(&bytes);
            }
        }
        let sum = xxh3_64(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err(Error::NotAModel);
        }
        if bytes.len() < 6 {
            return Err(Error::Truncated);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let parsed = parse_body(bytes);
        let stored_ok = bytes.len() >= 8 && {
            let (body, tail) = bytes.split_at(bytes.len() - 8);
            xxh3_64(body) == u64::from_le_bytes(tail.try_into().unwrap())
        };
        match parsed {
            Ok((model, consumed)) => {
                let rest = bytes.len() - consumed;
                if rest < 8 {
                    return Err(Error::Truncated);
                }
                if rest > 8 {
                    return Err(malformed(format!("{} trailing bytes", rest - 8)));
                }
                if !stored_ok {
                    let stored = u64::from_le_bytes(bytes[consumed..].try_into().unwrap());
                    return Err(Error::ChecksumMismatch { stored, computed: xxh3_64(&bytes[..consumed]) });
                }
                Ok(model)
            }
            Err(Error::Truncated) if stored_ok => Err(malformed("length fields overrun the file")),
            Err(e @ Error::Truncated) => Err(e),
            Err(e) if stored_ok => Err(e),
            Err(_) => {
                let (body, tail) = bytes.split_at(bytes.len().saturating_sub(8));
                let stored = u64::from_le_bytes(tail.try_into().unwrap_or([0; 8]));
                Err(Error::ChecksumMismatch { stored, computed: xxh3_64(body) })
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Parses everything up to the checksum; returns the model and bytes consumed.
fn parse_body(bytes: &[u8]) -> Result<(EstimatorModel, usize)> {
    let mut r = Reader { buf: bytes, pos: 6 };
    let kind = PatternKind::from_byte(r.u8()?).ok_or_else(|| malformed("unknown pattern kind"))?;
    let eb = r.f64()?;
    let max_len = r.u16()? as usize;
    let p_n_flag = r.u8()?;
    let p_n_value = r.f64()?;
    let p_n = match p_n_flag {
        0 => None,
        1 => Some(p_n_value),
        _ => return Err(malformed("bad p_n flag")),
    };
    let dataset_size = r.u64()?;
    let master_seed = r.u64()?;
    let n_buckets = r.u16()? as usize;
    let tau = r.u16()? as u32;
    let scheme = BucketScheme::with_count(eb, n_buckets).map_err(|e| malformed(e.to_string()))?;
    if tau as usize > n_buckets || (tau < 2 && n_buckets > 1) {
        return Err(malformed(format!("tree threshold {tau} outside 2..={n_buckets}")));
    }

    let mut filters = Vec::new();
    for id in 2..=tau {
        let m = r.u8()? as usize;
        if m == 0 {
            continue;
        }
        if m < 2 {
            return Err(malformed(format!("bucket {id} has {m} layers")));
        }
        let f = r.f64()?;
        let mut blooms = Vec::with_capacity(m - 1);
        for _ in 1..m {
            let seed = r.u64()?;
            let n_bits = r.u32()?;
            let k = r.u16()?;
            let n_words = (n_bits as usize).div_ceil(64);
            if n_words * 8 > r.remaining() {
                return Err(Error::Truncated);
            }
            let words = (0..n_words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            blooms.push(BloomFilter::from_parts(seed, n_bits, k, words)?);
        }
        let count = r.u32()? as usize;
        if count.saturating_mul(2) > r.remaining() {
            return Err(Error::Truncated);
        }
        let mut keys = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u16()? as usize;
            keys.push(r.take(len)?.to_vec());
        }
        filters.push(LayeredFilter::from_parts(id, f, blooms, LookupTable::new(keys, m % 2 == 1)));
    }

    let trie = match r.u8()? {
        0 => None,
        1 => {
            let count = r.u16()? as usize;
            if count * 4 > r.remaining() {
                return Err(Error::Truncated);
            }
            let nodes = (0..count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            Some(CompactTrie::from_parts(nodes, tau)?)
        }
        _ => return Err(malformed("bad tree flag")),
    };
    let companion = match r.u8()? {
        0 => None,
        1 => {
            let len = r.u64()?;
            let len = usize::try_from(len).map_err(|_| Error::Truncated)?;
            let inner = r.take(len)?;
            let model = EstimatorModel::from_bytes(inner)?;
            if model.kind != PatternKind::Substring {
                return Err(malformed("companion model is not a substring model"));
            }
            Some(Box::new(model))
        }
        _ => return Err(malformed("bad companion flag")),
    };

    let mut config = Config::new(eb, max_len);
    config.p_n = p_n;
    config.tree_threshold = Some(tau);
    config.long_queries = companion.is_some();
    config.validate().map_err(|e| malformed(e.to_string()))?;
    let model = EstimatorModel {
        config,
        kind,
        scheme,
        dataset_size,
        master_seed,
        tau,
        filters,
        trie,
        plan: None,
        companion,
    };
    Ok((model, r.pos))
}
