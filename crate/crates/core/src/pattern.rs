//! Query patterns and their canonical form.
//!
//! Every pattern is stored so that "P covers Q" is the same test for all
//! three kinds: `P.body()` is a byte-prefix of `Q.body()`. Suffix bodies are
//! therefore kept reversed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    /// `S%`
    Prefix,
    /// `%S`
    Suffix,
    /// `%S%`
    Substring,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Prefix, PatternKind::Suffix, PatternKind::Substring];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Prefix => "prefix",
            PatternKind::Suffix => "suffix",
            PatternKind::Substring => "substring",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            PatternKind::Prefix => 0,
            PatternKind::Suffix => 1,
            PatternKind::Substring => 2,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(PatternKind::Prefix),
            1 => Some(PatternKind::Suffix),
            2 => Some(PatternKind::Substring),
            _ => None,
        }
    }

    /// Maps a raw literal to its canonical body and back (the map is an involution).
    pub fn canonicalize(self, raw: &[u8]) -> Vec<u8> {
        match self {
            PatternKind::Suffix => raw.iter().rev().copied().collect(),
            _ => raw.to_vec(),
        }
    }

    /// Whether `row` matches the pattern with literal `raw`.
    pub fn matches(self, row: &[u8], raw: &[u8]) -> bool {
        match self {
            PatternKind::Prefix => row.starts_with(raw),
            PatternKind::Suffix => row.ends_with(raw),
            PatternKind::Substring => raw.is_empty() || row.windows(raw.len()).any(|w| w == raw),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prefix" => Ok(PatternKind::Prefix),
            "suffix" => Ok(PatternKind::Suffix),
            "substring" => Ok(PatternKind::Substring),
            other => Err(Error::InvalidParameter(format!("unknown pattern kind {other:?}"))),
        }
    }
}

/// A `LIKE` query in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    kind: PatternKind,
    body: Vec<u8>,
}

impl Query {
    /// Builds a query from the literal text between the wildcards.
    pub fn new(kind: PatternKind, raw: impl AsRef<[u8]>) -> Result<Self> {
        let raw = raw.as_ref();
        if raw.is_empty() {
            return Err(Error::InvalidParameter("query body must be non-empty".into()));
        }
        Ok(Query { kind, body: kind.canonicalize(raw) })
    }

    /// Builds a query from an already canonical body.
    pub fn from_canonical(kind: PatternKind, body: Vec<u8>) -> Result<Self> {
        if body.is_empty() {
            return Err(Error::InvalidParameter("query body must be non-empty".into()));
        }
        Ok(Query { kind, body })
    }

    /// Parses `S%`, `%S` or `%S%`. A `%` anywhere else is rejected.
    pub fn parse_like(text: &str) -> Result<Self> {
        let bytes = text.as_bytes();
        let lead = bytes.first() == Some(&b'%');
        let trail = bytes.len() > 1 && bytes.last() == Some(&b'%');
        let kind = match (lead, trail) {
            (false, true) => PatternKind::Prefix,
            (true, false) => PatternKind::Suffix,
            (true, true) => PatternKind::Substring,
            (false, false) => return Err(Error::MalformedPattern(text.to_string())),
        };
        let start = usize::from(lead);
        let end = bytes.len() - usize::from(trail);
        let inner = &bytes[start..end.max(start)];
        if inner.is_empty() || inner.contains(&b'%') {
            return Err(Error::MalformedPattern(text.to_string()));
        }
        Query::new(kind, inner)
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    /// Canonical body (reversed for suffix queries).
    pub fn body(&self) -> &[u8] {
        &self.body
    }

    /// The literal as the user wrote it.
    pub fn raw(&self) -> Vec<u8> {
        self.kind.canonicalize(&self.body)
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// True when every row matching `other` also matches `self`.
    pub fn covers(&self, other: &Query) -> bool {
        self.kind == other.kind && other.body.starts_with(&self.body)
    }

    pub fn matches(&self, row: &[u8]) -> bool {
        self.kind.matches(row, &self.raw())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = self.raw();
        let text = String::from_utf8_lossy(&raw);
        match self.kind {
            PatternKind::Prefix => write!(f, "{text}%"),
            PatternKind::Suffix => write!(f, "%{text}"),
            PatternKind::Substring => write!(f, "%{text}%"),
        }
    }
}
