use serde::Serialize;

use crate::bucket::check_eb;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_LEN: usize = 10;

/// Build-time knobs of an estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    /// Worst-case Q-error for non-empty-answer queries up to `max_len`.
    pub eb: f64,
    /// Longest query (in bytes) answered directly.
    pub max_len: usize,
    /// Minimum probability of routing an empty-answer query to the first bucket.
    pub p_n: Option<f64>,
    /// Buckets with id above this go to the tree index. `None` lets the planner choose.
    pub tree_threshold: Option<u32>,
    /// Use only frontier keys of the first bucket as negatives.
    pub frontier: bool,
    /// Also build a substring companion for long prefix/suffix queries.
    pub long_queries: bool,
}

impl Config {
    pub fn new(eb: f64, max_len: usize) -> Self {
        Config { eb, max_len, p_n: None, tree_threshold: None, frontier: true, long_queries: false }
    }

    pub fn with_p_n(mut self, p_n: f64) -> Self {
        self.p_n = Some(p_n);
        self
    }

    pub fn with_tree_threshold(mut self, tau: u32) -> Self {
        self.tree_threshold = Some(tau);
        self
    }

    pub fn with_frontier(mut self, on: bool) -> Self {
        self.frontier = on;
        self
    }

    pub fn with_long_queries(mut self, on: bool) -> Self {
        self.long_queries = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_eb(self.eb)?;
        if self.max_len < 2 || self.max_len > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("max length must be in [2, 65535], got {}", self.max_len)));
        }
        if let Some(p) = self.p_n {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!("p_n must be in (0, 1), got {p}")));
            }
        }
        if self.tree_threshold == Some(0) {
            return Err(Error::InvalidParameter("tree threshold must be positive".into()));
        }
        Ok(())
    }
}

impl Default for Config {
    fn default() -> Self {
        Config::new(1.5, DEFAULT_MAX_LEN)
    }
}
