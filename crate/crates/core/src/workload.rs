//! Workloads and their tab-separated file format:
//! `kind <TAB> raw-body <TAB> true-cardinality`, one query per line.
//!
//! Bodies are written as UTF-8; control bytes, invalid UTF-8, `\` and `%`
//! are escaped as `\xNN`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pattern::{PatternKind, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadSplit {
    /// Every query was enumerated at build time.
    TrainEquivalent,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub kind: PatternKind,
    pub split: WorkloadSplit,
    pub entries: Vec<(Query, u64)>,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, card) in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", q.kind(), escape_bytes(&q.raw()), card);
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut kind = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::WorkloadFormat { line: line_no, msg };
            let mut cols = line.split('\t');
            let (Some(k), Some(body), Some(card), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(err("expected 3 tab-separated columns".into()));
            };
            let k: PatternKind = k.parse().map_err(|e: Error| err(e.to_string()))?;
            if *kind.get_or_insert(k) != k {
                return Err(err(format!("mixed pattern kinds ({} and {k})", kind.unwrap())));
            }
            let raw = unescape_bytes(body).map_err(err)?;
            let card = card.trim().parse::<u64>().map_err(|e| err(format!("bad cardinality: {e}")))?;
            let q = Query::new(k, raw).map_err(|e| err(e.to_string()))?;
            entries.push((q, card));
        }
        let kind = kind.ok_or_else(|| Error::WorkloadFormat { line: 0, msg: "workload is empty".into() })?;
        Ok(Workload { kind, split: WorkloadSplit::Test, entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Workload::parse_tsv(&fs::read_to_string(path)?)
    }
}

pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for chunk in bytes.utf8_chunks() {
        for ch in chunk.valid().chars() {
            if ch.is_control() || ch == '\\' || ch == '%' {
                let mut buf = [0u8; 4];
                for b in ch.encode_utf8(&mut buf).bytes() {
                    let _ = write!(out, "\\x{b:02x}");
                }
            } else {
                out.push(ch);
            }
        }
        for b in chunk.invalid() {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
    out
}

pub fn unescape_bytes(text: &str) -> std::result::Result<Vec<u8>, String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let hex = bytes.get(i + 1..i + 4).filter(|h| h[0] == b'x').ok_or("dangling escape")?;
            let s = std::str::from_utf8(&hex[1..]).map_err(|_| "bad escape")?;
            out.push(u8::from_str_radix(s, 16).map_err(|_| format!("bad escape \\x{s}"))?);
            i += 4;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}
