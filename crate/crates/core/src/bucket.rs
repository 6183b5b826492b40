//! Geometric cardinality buckets and the Q-error metric.

use serde::Serialize;

use crate::error::{Error, Result};

/// Cardinality range `[lower, upper]` answered with `est`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bucket {
    /// 1-based.
    pub id: u32,
    pub lower: u64,
    pub upper: u64,
    pub est: f64,
}

impl Bucket {
    pub fn contains(&self, card: u64) -> bool {
        self.lower <= card && card <= self.upper
    }
}

/// Buckets tiling `[1, max_card]` with `upper = floor(lower * eb^2)` and
/// `est = lower * eb`, so any correctly bucketed cardinality has Q-error at
/// most `eb`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketScheme {
    eb: f64,
    buckets: Vec<Bucket>,
}

impl BucketScheme {
    /// Smallest scheme whose last bucket reaches `max_card`.
    pub fn new(eb: f64, max_card: u64) -> Result<Self> {
        check_eb(eb)?;
        if max_card == 0 {
            return Err(Error::InvalidParameter("max_card must be at least 1".into()));
        }
        let mut scheme = BucketScheme { eb, buckets: Vec::new() };
        while scheme.buckets.last().is_none_or(|b| b.upper < max_card) {
            scheme.push_next();
        }
        Ok(scheme)
    }

    /// Scheme with exactly `count` buckets (used when loading a model).
    pub fn with_count(eb: f64, count: usize) -> Result<Self> {
        check_eb(eb)?;
        if count == 0 {
            return Err(Error::InvalidParameter("bucket count must be at least 1".into()));
        }
        let mut scheme = BucketScheme { eb, buckets: Vec::with_capacity(count) };
        for _ in 0..count {
            scheme.push_next();
        }
        Ok(scheme)
    }

    fn push_next(&mut self) {
        let lower = self.buckets.last().map_or(1, |b| b.upper + 1);
        let upper = (lower as f64 * self.eb * self.eb).floor() as u64;
        self.buckets.push(Bucket {
            id: self.buckets.len() as u32 + 1,
            lower,
            upper: upper.max(lower),
            est: lower as f64 * self.eb,
        });
    }

    pub fn eb(&self) -> f64 {
        self.eb
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    /// Bucket by 1-based id.
    pub fn get(&self, id: u32) -> Option<&Bucket> {
        id.checked_sub(1).and_then(|i| self.buckets.get(i as usize))
    }

    pub fn max_coverage(&self) -> u64 {
        self.buckets.last().map_or(0, |b| b.upper)
    }

    /// Representative estimate of bucket `id`.
    pub fn est(&self, id: u32) -> f64 {
        self.get(id).map_or(self.eb, |b| b.est)
    }

    pub fn bucket_of(&self, card: u64) -> Result<u32> {
        if card == 0 {
            return Err(Error::ZeroCardinality);
        }
        let idx = self.buckets.partition_point(|b| b.upper < card);
        match self.buckets.get(idx) {
            Some(b) => Ok(b.id),
            None => Err(Error::OutOfCoverage { card, max: self.max_coverage() }),
        }
    }
}

pub(crate) fn check_eb(eb: f64) -> Result<()> {
    if !(eb.is_finite() && eb > 1.0) {
        return Err(Error::InvalidParameter(format!("error bound must be > 1, got {eb}")));
    }
    Ok(())
}

/// `max(est / truth, truth / est)`.
pub fn q_error(est: f64, truth: f64) -> Result<f64> {
    if !(est > 0.0 && truth > 0.0) {
        return Err(Error::InvalidParameter(format!("q-error needs positive inputs, got ({est}, {truth})")));
    }
    Ok((est / truth).max(truth / est))
}
