//! Storage cost model and the planner that picks layer counts, false-positive
//! rates and the tree threshold.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::layered::BucketedKeys;
use crate::probmodel::{feasible_f_range, p_b1_prefix_walk, p_fallthrough_naive, F_CEILING, F_FLOOR};
use crate::treeindex::{CompactTrie, MAX_ID_OFFSET};

pub const DEFAULT_M_CANDIDATES: [usize; 7] = [2, 3, 4, 5, 6, 7, 8];
pub const DIRECT_BUDGET: usize = 200;

/// Key counts that drive the cost of one bucket's cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BucketStats {
    pub bucket_id: u32,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Longest key, in bytes.
    pub max_len: usize,
}

/// Predicted bits of a cascade with `m` layers sharing rate `f`.
///
/// With `m = 2k + 1` the positives are stored in the closing table:
/// `-ln f / ln²2 · (N_p + N_n f)(1 - f^k)/(1 - f) + 8 L N_p f^k`.
/// With `m = 2k` the negatives are:
/// `-ln f / ln²2 · [N_p (1 - f^k) + N_n f (1 - f^(k-1))]/(1 - f) + 8 L N_n f^k`.
pub fn storage_cost(m: usize, f: f64, stats: &BucketStats) -> f64 {
    let k = (m / 2) as i32;
    let (np, nn, l) = (stats.n_pos as f64, stats.n_neg as f64, stats.max_len as f64);
    let per_key = -f.ln() / (LN_2 * LN_2);
    let fk = f.powi(k);
    if m % 2 == 1 {
        per_key * (np + nn * f) / (1.0 - f) * (1.0 - fk) + 8.0 * l * np * fk
    } else {
        per_key / (1.0 - f) * (np * (1.0 - fk) + nn * f * (1.0 - f.powi(k - 1))) + 8.0 * l * nn * fk
    }
}

/// Fixed bytes of one serialized cascade (layer count, rate, bloom headers,
/// table count) in bits. Charged when comparing tree thresholds, since the
/// tree index is costed at its exact serialized size.
pub fn filter_header_bits(m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    8.0 * (1 + 8 + 14 * (m - 1) + 4) as f64
}

/// Global minimizer of `func` on `[lo, hi]` by DIRECT-style trisection,
/// then golden-section polish around the incumbent. Deterministic.
pub fn direct_minimize(func: impl Fn(f64) -> f64, lo: f64, hi: f64, budget: usize) -> (f64, f64) {
    struct Cell {
        center: f64,
        level: u32,
        value: f64,
    }
    let half0 = 0.5 * (hi - lo);
    let half = |level: u32| half0 / 3f64.powi(level as i32);
    let mut cells = vec![Cell { center: lo + half0, level: 0, value: func(lo + half0) }];
    let mut evals = 1;
    const EPS: f64 = 1e-4;

    while evals + 2 <= budget {
        let f_min = cells.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
        // best cell per size; ties broken by position so selection is deterministic
        let mut best: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            let slot = best.entry(c.level).or_insert(i);
            if c.value < cells[*slot].value {
                *slot = i;
            }
        }
        let reps: Vec<usize> = best.values().copied().collect();
        let mut chosen = Vec::new();
        for &j in &reps {
            let (dj, fj) = (half(cells[j].level), cells[j].value);
            let mut k_low: f64 = 0.0;
            let mut k_high = f64::INFINITY;
            for &i in &reps {
                let (di, fi) = (half(cells[i].level), cells[i].value);
                if di < dj {
                    k_low = k_low.max((fj - fi) / (dj - di));
                } else if di > dj {
                    k_high = k_high.min((fi - fj) / (di - dj));
                }
            }
            if k_low > k_high {
                continue;
            }
            if k_high.is_finite() && fj - k_high * dj > f_min - EPS * f_min.abs() {
                continue;
            }
            chosen.push(j);
        }
        if chosen.is_empty() {
            break;
        }
        for j in chosen {
            if evals + 2 > budget {
                break;
            }
            let level = cells[j].level + 1;
            let step = 2.0 * half(level);
            let center = cells[j].center;
            cells[j].level = level;
            for c in [center - step, center + step] {
                cells.push(Cell { center: c, level, value: func(c) });
                evals += 1;
            }
        }
    }

    let best = cells.iter().min_by(|a, b| a.value.total_cmp(&b.value).then(a.center.total_cmp(&b.center))).unwrap();
    let (mut a, mut b) = ((best.center - 2.0 * half(best.level)).max(lo), (best.center + 2.0 * half(best.level)).min(hi));
    let (mut x_best, mut f_best) = (best.center, best.value);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (func(x1), func(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = func(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = func(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < f_best {
            x_best = x;
            f_best = v;
        }
    }
    (x_best, f_best)
}

/// Plan for one filtered bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanChoice {
    pub bucket_id: u32,
    /// 0 when the bucket has no keys and gets no filter.
    pub m: usize,
    pub f: f64,
    pub predicted_bits: f64,
}

/// Cheapest `(m, f)` for one bucket with `f` searched in `[F_FLOOR, f_max(m)]`.
pub fn optimize_bucket(
    stats: &BucketStats,
    m_candidates: &[usize],
    f_max: impl Fn(usize) -> Result<f64>,
) -> Result<PlanChoice> {
    if stats.n_pos == 0 {
        return Ok(PlanChoice { bucket_id: stats.bucket_id, m: 0, f: 0.0, predicted_bits: 0.0 });
    }
    let mut best: Option<PlanChoice> = None;
    let mut last_err = None;
    for &m in m_candidates {
        let hi = match f_max(m) {
            Ok(hi) => hi.min(F_CEILING),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if hi < F_FLOOR {
            continue;
        }
        let (x, cost) = if hi <= F_FLOOR * (1.0 + 1e-12) {
            (F_FLOOR.ln(), storage_cost(m, F_FLOOR, stats))
        } else {
            direct_minimize(|x| storage_cost(m, x.exp(), stats), F_FLOOR.ln(), hi.ln(), DIRECT_BUDGET)
        };
        let f = x.exp().clamp(F_FLOOR, hi);
        if best.is_none_or(|b| cost < b.predicted_bits) {
            best = Some(PlanChoice { bucket_id: stats.bucket_id, m, f, predicted_bits: cost });
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Infeasible(format!("no feasible (m, f) for bucket {}", stats.bucket_id)))
    })
}

/// Full build plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    /// Buckets `2..=tau` are filtered; buckets above go to the tree index.
    pub tau: u32,
    pub n_buckets: u32,
    pub buckets: Vec<PlanChoice>,
    pub trie_bits: f64,
    pub total_bits: f64,
    pub p_n: Option<f64>,
    /// Guaranteed bucket-1 rate for empty-answer queries under the plan,
    /// using the worst bucket's `(m, f)`.
    pub walk_rate: Option<f64>,
}

impl Plan {
    pub fn bucket(&self, id: u32) -> Option<&PlanChoice> {
        self.buckets.iter().find(|b| b.bucket_id == id)
    }

    /// Human-readable report.
    pub fn explain(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "buckets: {}  tree threshold: {}", self.n_buckets, self.tau);
        let _ = writeln!(s, "{:>6} {:>3} {:>12} {:>16}", "bucket", "m", "f", "predicted bits");
        for b in &self.buckets {
            let _ = writeln!(s, "{:>6} {:>3} {:>12.3e} {:>16.0}", b.bucket_id, b.m, b.f, b.predicted_bits);
        }
        let _ = writeln!(s, "tree index bits: {:.0}", self.trie_bits);
        let _ = writeln!(s, "total predicted bits: {:.0} ({:.1} KiB)", self.total_bits, self.total_bits / 8192.0);
        if let (Some(p_n), Some(rate)) = (self.p_n, self.walk_rate) {
            let _ = writeln!(s, "empty-answer target {p_n}: guaranteed {rate:.6} (slack {:+.6})", rate - p_n);
        }
        s
    }
}

pub fn bucket_stats(keys: &BucketedKeys<'_>, id: u32, use_frontier: bool) -> BucketStats {
    let pos = keys.bucket(id);
    let b1 = if use_frontier { &keys.frontier } else { &keys.by_bucket[0] };
    let max_len = pos
        .iter()
        .chain(b1.iter())
        .chain(keys.by_bucket[id as usize..].iter().flatten())
        .map(|k| k.len())
        .max()
        .unwrap_or(0);
    BucketStats { bucket_id: id, n_pos: pos.len(), n_neg: keys.negative_count(id, use_frontier), max_len }
}

/// Tree index over the buckets above `tau`.
pub fn trie_for(keys: &BucketedKeys<'_>, tau: u32) -> Result<CompactTrie> {
    let n = keys.n_buckets();
    if n - tau > MAX_ID_OFFSET {
        return Err(Error::TreeThresholdTooLow { bucket: n, threshold: tau });
    }
    let entries = (tau + 1..=n).flat_map(|id| keys.bucket(id).iter().map(move |k| (*k, id)));
    CompactTrie::build(entries, tau)
}

/// Picks `tau` and per-bucket `(m, f)` minimizing predicted bits. Buckets
/// above `tau` are costed by building their tree index.
pub fn select_plan(keys: &BucketedKeys<'_>, config: &Config, m_candidates: &[usize]) -> Result<Plan> {
    let n = keys.n_buckets();
    if n == 1 {
        return Ok(Plan { tau: 1, n_buckets: 1, buckets: Vec::new(), trie_bits: 0.0, total_bits: 0.0, p_n: config.p_n, walk_rate: None });
    }
    let stats: Vec<BucketStats> = (2..=n).map(|id| bucket_stats(keys, id, config.frontier)).collect();
    let candidates: Vec<u32> = match config.tree_threshold {
        Some(t) => vec![t.clamp(2, n)],
        None => (2..=n).rev().collect(),
    };

    let mut unconstrained: Option<Vec<PlanChoice>> = None;
    let mut best: Option<Plan> = None;
    let mut last_err = None;
    for tau in candidates {
        let trie = if tau == n {
            None
        } else {
            match trie_for(keys, tau) {
                Ok(t) => Some(t),
                Err(e) if config.tree_threshold.is_some() => return Err(e),
                // lower thresholds only put more keys in the tree
                Err(_) => break,
            }
        };
        let trie_bits = trie.as_ref().map_or(0.0, |t| 8.0 * t.serialized_len() as f64);

        let choices: Result<Vec<PlanChoice>> = match config.p_n {
            None => {
                let all = match &unconstrained {
                    Some(v) => v.clone(),
                    None => {
                        let v = stats
                            .iter()
                            .map(|s| optimize_bucket(s, m_candidates, |_| Ok(F_CEILING)))
                            .collect::<Result<Vec<_>>>()?;
                        unconstrained = Some(v.clone());
                        v
                    }
                };
                Ok(all[..(tau - 1) as usize].to_vec())
            }
            Some(p_n) => stats[..(tau - 1) as usize]
                .iter()
                .map(|s| optimize_bucket(s, m_candidates, |m| feasible_f_range(p_n, tau as usize, m)))
                .collect(),
        };
        let choices = match choices {
            Ok(c) => c,
            Err(e @ Error::Infeasible(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let total = choices.iter().map(|c| c.predicted_bits + filter_header_bits(c.m)).sum::<f64>() + trie_bits;
        let walk_rate = config.p_n.map(|_| {
            choices
                .iter()
                .filter(|c| c.m > 0)
                .map(|c| p_b1_prefix_walk(p_fallthrough_naive(c.f, c.m, tau as usize), 2, tau as usize))
                .fold(1.0, f64::min)
        });
        if best.as_ref().is_none_or(|b| total < b.total_bits) {
            best = Some(Plan { tau, n_buckets: n, buckets: choices, trie_bits, total_bits: total, p_n: config.p_n, walk_rate });
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Infeasible("no tree threshold admits a plan".into())))
}
