use std::io;

use thiserror::Error;

use crate::pattern::PatternKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset: nothing to enumerate")]
    EmptyDataset,

    #[error("cardinality 0 has no bucket; empty-answer queries are routed separately")]
    ZeroCardinality,

    #[error("cardinality {card} exceeds bucket coverage {max}")]
    OutOfCoverage { card: u64, max: u64 },

    #[error("positive and negative key sets overlap")]
    OverlappingKeys,

    #[error("could not generate {wanted} empty-answer queries in {attempts} attempts; alphabet too small")]
    WorkloadExhausted { wanted: usize, attempts: usize },

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("tree threshold too low: bucket {bucket} is more than 15 above threshold {threshold}")]
    TreeThresholdTooLow { bucket: u32, threshold: u32 },

    #[error("tree too large ({nodes} nodes), raise the tree threshold")]
    TreeTooLarge { nodes: usize },

    #[error("long-query support not built: {kind} model has no companion substring model")]
    LongQueryUnsupported { kind: PatternKind },

    #[error("pattern kind mismatch: model is {model}, query is {query}")]
    KindMismatch { model: PatternKind, query: PatternKind },

    #[error("malformed pattern {0:?}: expected S%, %S or %S% with no interior %")]
    MalformedPattern(String),

    #[error("not a model file")]
    NotAModel,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    #[error("model file truncated")]
    Truncated,

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("malformed model file: {0}")]
    Malformed(String),

    #[error("workload line {line}: {msg}")]
    WorkloadFormat { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
