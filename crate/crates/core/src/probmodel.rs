//! Closed forms for how empty-answer queries are routed.
//!
//! All layers of a bucket share false-positive rate `f`, layers fire
//! independently, and every filtered bucket has the same misassignment
//! probability.

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper end of the `f` search interval when nothing else constrains it.
pub const F_CEILING: f64 = 0.5;
/// Lower end of the `f` search interval.
pub const F_FLOOR: f64 = 1e-6;

const BISECT_TOL: f64 = 1e-9;
const SCAN_STEPS: usize = 20_000;

/// Probability that an empty-answer query is accepted by one `m`-layer
/// cascade: `(f - f^m) / (1 + f)` for odd `m`, `(f + f^m) / (1 + f)` for even.
pub fn p_bucket(f: f64, m: usize) -> f64 {
    let fm = f.powi(m as i32);
    if m % 2 == 1 {
        (f - fm) / (1.0 + f)
    } else {
        (f + fm) / (1.0 + f)
    }
}

/// Probability that an empty-answer query passes all `n - 1` filtered buckets.
pub fn p_fallthrough_naive(f: f64, m: usize, n: usize) -> f64 {
    (1.0 - p_bucket(f, m)).powi(n as i32 - 1)
}

/// `C(n + t - 2, t) / (n - 1)^t`: share of bucket-id sequences of length `t`
/// over `{2..n}` that are non-decreasing.
pub fn nondecreasing_share(t: usize, n: usize) -> f64 {
    let support = (n - 1) as f64;
    (1..=t).map(|i| (support - 1.0 + i as f64) / (i as f64 * support)).product()
}

/// `C(a, b)` as a float.
pub fn binomial(a: usize, b: usize) -> f64 {
    if b > a {
        return 0.0;
    }
    let b = b.min(a - b);
    (1..=b).map(|i| (a - b + i) as f64 / i as f64).product()
}

/// Probability that the prefix walk over `t` independently classified
/// prefixes lands in bucket 1, when each lands there with probability `q`.
pub fn p_b1_prefix_walk(q: f64, t: usize, n: usize) -> f64 {
    1.0 - (1.0 - q).powi(t as i32) * nondecreasing_share(t, n)
}

/// `((1 - p_n) / C(n + t - 2, t))^(1/t)`.
pub fn g(p_n: f64, t: usize, n: usize) -> f64 {
    ((1.0 - p_n) / binomial(n + t - 2, t)).powf(1.0 / t as f64)
}

/// Planning quantities for `n` buckets, `m` layers and target `p_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmptyAnswerModel {
    pub n: usize,
    pub m: usize,
    pub f: f64,
    /// Per-bucket misassignment probability.
    pub p: f64,
    /// Fall-through probability to bucket 1.
    pub q: f64,
    /// Prefixes assumed by the planner.
    pub t: usize,
}

impl EmptyAnswerModel {
    pub fn new(f: f64, m: usize, n: usize) -> Self {
        let p = p_bucket(f, m);
        EmptyAnswerModel { n, m, f, p, q: (1.0 - p).powi(n as i32 - 1), t: 2 }
    }

    /// Guaranteed bucket-1 rate of the prefix walk.
    pub fn walk_rate(&self) -> f64 {
        p_b1_prefix_walk(self.q, self.t, self.n)
    }
}

/// Constraint constants `(c, c')` for target `p_n` over `n` buckets: the
/// walk meets `p_n` once `q >= c`, i.e. once `p <= c'`.
pub fn constraint_constants(p_n: f64, n: usize) -> (f64, f64) {
    let c = 1.0 - (n as f64 - 1.0) * g(p_n, 2, n);
    let c_prime = if c <= 0.0 { 1.0 } else { 1.0 - c.powf(1.0 / (n as f64 - 1.0)) };
    (c, c_prime)
}

/// Largest `f_max <= F_CEILING` such that every `f` in `(0, f_max]` keeps
/// the prefix-walk bucket-1 rate at or above `p_n` with `n` buckets.
pub fn feasible_f_range(p_n: f64, n: usize, m: usize) -> Result<f64> {
    if !(p_n > 0.0 && p_n < 1.0) {
        return Err(Error::InvalidParameter(format!("p_n must be in (0, 1), got {p_n}")));
    }
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and m >= 2, got n={n}, m={m}")));
    }
    let (c, c_prime) = constraint_constants(p_n, n);
    if c <= 0.0 {
        return Ok(F_CEILING);
    }
    if c_prime <= 0.0 {
        return Err(Error::Infeasible(format!("p_n = {p_n} cannot be met with {n} buckets and {m} layers")));
    }
    let ok = |f: f64| p_bucket(f, m) <= c_prime;
    // odd m peaks inside (0, 1), so find the first crossing on a grid before bisecting
    let mut lo = 0.0;
    let mut hi = None;
    for step in 1..=SCAN_STEPS {
        let f = F_CEILING * step as f64 / SCAN_STEPS as f64;
        if ok(f) {
            lo = f;
        } else {
            hi = Some(f);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(F_CEILING);
    };
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo < F_FLOOR {
        return Err(Error::Infeasible(format!(
            "p_n = {p_n} needs false-positive rate below {F_FLOOR:e} with {n} buckets and {m} layers"
        )));
    }
    Ok(lo)
}
