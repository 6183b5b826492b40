//! Array-packed trie for the few keys of high-cardinality buckets.
//!
//! Each node is one little-endian `u32`:
//!
//! ```text
//! bits  0..8   label byte
//! bits  8..12  bucket id offset from the threshold (0 = no id)
//! bits 12..28  index of the first child (0 = leaf)
//! bit  28      last sibling
//! bits 29..32  reserved, zero
//! ```
//!
//! Node 0 is the root. Children of a node are contiguous and laid out
//! breadth-first.

use std::borrow::Borrow;
use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

pub const MAX_NODES: usize = u16::MAX as usize;
pub const MAX_ID_OFFSET: u32 = 15;
pub const NODE_BYTES: usize = 4;

const ID_SHIFT: u32 = 8;
const CHILD_SHIFT: u32 = 12;
const LAST_BIT: u32 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactTrie {
    nodes: Vec<u32>,
    threshold: u32,
}

#[derive(Default)]
struct Draft {
    offset: u32,
    children: BTreeMap<u8, usize>,
}

impl CompactTrie {
    /// Builds the trie for `entries` (key, bucket id). Ids must lie in
    /// `threshold + 1 ..= threshold + 15`.
    pub fn build<I, K, V>(entries: I, threshold: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<[u8]>,
        V: Borrow<u32>,
    {
        let mut drafts = vec![Draft::default()];
        for (key, id) in entries {
            let id = *id.borrow();
            if id <= threshold || id - threshold > MAX_ID_OFFSET {
                return Err(Error::TreeThresholdTooLow { bucket: id, threshold });
            }
            let mut at = 0;
            for &b in key.as_ref() {
                at = match drafts[at].children.get(&b) {
                    Some(&next) => next,
                    None => {
                        drafts.push(Draft::default());
                        let next = drafts.len() - 1;
                        drafts[at].children.insert(b, next);
                        next
                    }
                };
                if drafts.len() > MAX_NODES {
                    return Err(Error::TreeTooLarge { nodes: drafts.len() });
                }
            }
            drafts[at].offset = id - threshold;
        }

        let mut nodes = vec![0u32; drafts.len()];
        nodes[0] = LAST_BIT;
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        let mut next_free = 1usize;
        while let Some((draft, slot)) = queue.pop_front() {
            let d = &drafts[draft];
            nodes[slot] |= d.offset << ID_SHIFT;
            if d.children.is_empty() {
                continue;
            }
            nodes[slot] |= (next_free as u32) << CHILD_SHIFT;
            let count = d.children.len();
            for (i, (&label, &child)) in d.children.iter().enumerate() {
                let s = next_free + i;
                nodes[s] = u32::from(label) | if i + 1 == count { LAST_BIT } else { 0 };
                queue.push_back((child, s));
            }
            next_free += count;
        }
        Ok(CompactTrie { nodes, threshold })
    }

    pub(crate) fn from_parts(nodes: Vec<u32>, threshold: u32) -> Result<Self> {
        if nodes.is_empty() || nodes.len() > MAX_NODES {
            return Err(Error::Malformed(format!("trie node count {} out of range", nodes.len())));
        }
        if nodes.iter().any(|&n| ((n >> CHILD_SHIFT) & 0xffff) as usize >= nodes.len()) {
            return Err(Error::Malformed("trie child index out of range".into()));
        }
        Ok(CompactTrie { nodes, threshold })
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node count header plus the packed nodes.
    pub fn serialized_len(&self) -> usize {
        2 + NODE_BYTES * self.nodes.len()
    }

    pub fn lookup(&self, key: &[u8]) -> Option<u32> {
        let mut at = 0usize;
        for &b in key {
            let mut child = ((self.nodes[at] >> CHILD_SHIFT) & 0xffff) as usize;
            if child == 0 {
                return None;
            }
            loop {
                let node = self.nodes[child];
                if node as u8 == b {
                    break;
                }
                if node & LAST_BIT != 0 {
                    return None;
                }
                child += 1;
            }
            at = child;
        }
        match (self.nodes[at] >> ID_SHIFT) & 0xf {
            0 => None,
            offset => Some(self.threshold + offset),
        }
    }
}
