//! Cardinality estimation for prefix (`S%`), suffix (`%S`) and substring
//! (`%S%`) `LIKE` predicates with a hard Q-error bound.
//!
//! Every non-empty pattern up to a maximum length is enumerated offline and
//! placed in a geometric cardinality bucket. Per-bucket cascades of Bloom
//! filters, closed by exact tables, classify queries back into their bucket,
//! so any such pattern is estimated within the configured error bound.
//! Empty-answer queries fall through to the first bucket with a tunable
//! probability, and longer queries are composed from short ones with a
//! Markov chain.

pub mod bloom;
pub mod bucket;
pub mod config;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod format;
pub mod groundtruth;
pub mod layered;
pub mod paramsel;
pub mod pattern;
pub mod probmodel;
pub mod treeindex;
pub mod workload;

pub use bucket::{q_error, Bucket, BucketScheme};
pub use config::Config;
pub use error::{Error, Result};
pub use estimator::EstimatorModel;
pub use groundtruth::{exact_cardinality, gen_workload, PatternCatalog};
pub use pattern::{PatternKind, Query};
pub use workload::Workload;
