//! Accuracy report for a model over a workload.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::bucket::q_error;
use crate::error::{Error, Result};
use crate::estimator::EstimatorModel;
use crate::workload::Workload;

/// Estimates below this count as "identified empty".
pub const EMPTY_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub p100: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakdown {
    pub label: String,
    pub count: usize,
    pub mean_q_error: f64,
    pub max_q_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub queries: usize,
    pub non_empty: usize,
    pub empty: usize,
    /// Long queries the model cannot answer (no companion substring model).
    pub unsupported: usize,
    pub mean_q_error: Option<f64>,
    pub quantiles: Option<Quantiles>,
    pub by_cardinality: Vec<Breakdown>,
    pub by_length: Vec<Breakdown>,
    pub empty_identification_rate: Option<f64>,
    pub model_size_bytes: usize,
    pub build_seconds: Option<f64>,
    pub mean_latency_us: f64,
}

/// Nearest-rank quantile of sorted data.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn breakdown(label: String, errs: &[f64]) -> Breakdown {
    Breakdown {
        label,
        count: errs.len(),
        mean_q_error: errs.iter().sum::<f64>() / errs.len() as f64,
        max_q_error: errs.iter().copied().fold(0.0, f64::max),
    }
}

pub fn evaluate(model: &EstimatorModel, workload: &Workload, build_seconds: Option<f64>) -> Result<EvalReport> {
    if workload.is_empty() {
        return Err(Error::InvalidParameter("workload is empty".into()));
    }
    if workload.kind != model.kind() {
        return Err(Error::KindMismatch { model: model.kind(), query: workload.kind });
    }
    let scheme = model.scheme();
    let mut errs = Vec::new();
    let mut by_bucket: Vec<Vec<f64>> = vec![Vec::new(); scheme.len() + 1];
    let mut by_len: Vec<Vec<f64>> = Vec::new();
    let (mut empty, mut identified, mut unsupported) = (0usize, 0usize, 0usize);
    let mut elapsed = 0.0;
    let mut timed = 0usize;

    for (query, card) in &workload.entries {
        let start = Instant::now();
        let est = match model.estimate(query) {
            Ok(e) => e,
            Err(Error::LongQueryUnsupported { .. }) => {
                unsupported += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        elapsed += start.elapsed().as_secs_f64();
        timed += 1;
        if *card == 0 {
            empty += 1;
            identified += usize::from(est < EMPTY_THRESHOLD);
            continue;
        }
        let qe = q_error(est, *card as f64)?;
        errs.push(qe);
        // cardinalities above the model's range share the last slot
        let slot = scheme.bucket_of(*card).map_or(scheme.len(), |id| id as usize - 1);
        by_bucket[slot].push(qe);
        if by_len.len() < query.len() {
            by_len.resize(query.len(), Vec::new());
        }
        by_len[query.len() - 1].push(qe);
    }

    let mean_q_error = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
    let quantiles = (!errs.is_empty()).then(|| {
        errs.sort_by(f64::total_cmp);
        Quantiles {
            p50: nearest_rank(&errs, 0.5),
            p90: nearest_rank(&errs, 0.9),
            p99: nearest_rank(&errs, 0.99),
            p100: nearest_rank(&errs, 1.0),
        }
    });
    let by_cardinality = by_bucket
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(i, v)| {
            let label = match scheme.buckets().get(i) {
                Some(b) => format!("[{}, {}]", b.lower, b.upper),
                None => format!("> {}", scheme.max_coverage()),
            };
            breakdown(label, v)
        })
        .collect();
    let by_length =
        by_len.iter().enumerate().filter(|(_, v)| !v.is_empty()).map(|(i, v)| breakdown((i + 1).to_string(), v)).collect();

    Ok(EvalReport {
        queries: workload.len(),
        non_empty: errs.len(),
        empty,
        unsupported,
        mean_q_error,
        quantiles,
        by_cardinality,
        by_length,
        empty_identification_rate: (empty > 0).then(|| identified as f64 / empty as f64),
        model_size_bytes: model.size_bytes(),
        build_seconds,
        mean_latency_us: if timed == 0 { 0.0 } else { elapsed / timed as f64 * 1e6 },
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "queries: {} (non-empty {}, empty {}, unsupported {})",
            self.queries, self.non_empty, self.empty, self.unsupported
        );
        let _ = writeln!(s, "mean q-error:        {}", opt(self.mean_q_error, 4));
        let q = self.quantiles;
        let _ = writeln!(
            s,
            "q-error 50/90/99/100: {} / {} / {} / {}",
            opt(q.map(|q| q.p50), 4),
            opt(q.map(|q| q.p90), 4),
            opt(q.map(|q| q.p99), 4),
            opt(q.map(|q| q.p100), 4)
        );
        let _ = writeln!(s, "empty identified:    {}", opt(self.empty_identification_rate, 4));
        let _ = writeln!(s, "model size:          {} bytes", self.model_size_bytes);
        let _ = writeln!(s, "build time:          {}", self.build_seconds.map_or("n/a".into(), |t| format!("{t:.3} s")));
        let _ = writeln!(s, "mean latency:        {:.2} us", self.mean_latency_us);
        for (title, rows) in [("cardinality", &self.by_cardinality), ("length", &self.by_length)] {
            let _ = writeln!(s, "\n{:<20} {:>8} {:>10} {:>10}", title, "count", "mean", "max");
            for b in rows {
                let _ = writeln!(s, "{:<20} {:>8} {:>10.4} {:>10.4}", b.label, b.count, b.mean_q_error, b.max_q_error);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::groundtruth::{gen_workload, PatternCatalog};
    use crate::pattern::PatternKind;
    use crate::workload::WorkloadSplit;

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5), 5.0);
        assert_eq!(nearest_rank(&v, 0.9), 9.0);
        assert_eq!(nearest_rank(&v, 0.99), 10.0);
        assert_eq!(nearest_rank(&v, 1.0), 10.0);
        assert_eq!(nearest_rank(&[3.0], 0.5), 3.0);
    }

    fn setup() -> (Vec<String>, EstimatorModel, PatternCatalog) {
        let rows: Vec<String> = (0..600).map(|i| format!("{}.{}.{}", i % 9, i % 31, i)).collect();
        let m = EstimatorModel::build(&rows, PatternKind::Substring, &Config::new(1.5, 5), 2).unwrap();
        let c = PatternCatalog::enumerate(&rows, PatternKind::Substring, 5).unwrap();
        (rows, m, c)
    }

    #[test]
    fn catalog_workload_bounded() {
        let (rows, m, c) = setup();
        let w = gen_workload(&c, &rows, 500, 0, 1, 4).unwrap();
        let r = evaluate(&m, &w, None).unwrap();
        assert_eq!(r.non_empty, 500);
        assert!(r.quantiles.unwrap().p100 <= 1.5);
        assert!(r.empty_identification_rate.is_none());
        let q = r.quantiles.unwrap();
        assert!(q.p50 <= q.p90 && q.p90 <= q.p99 && q.p99 <= q.p100);
        assert_eq!(r.by_cardinality.iter().map(|b| b.count).sum::<usize>(), 500);
        assert_eq!(r.by_length.iter().map(|b| b.count).sum::<usize>(), 500);
        assert!(r.to_text().contains("mean q-error"));
    }

    #[test]
    fn empty_only_workload() {
        let (rows, m, c) = setup();
        let w = gen_workload(&c, &rows, 0, 200, 2, 4).unwrap();
        let r = evaluate(&m, &w, None).unwrap();
        assert_eq!(r.empty, 200);
        assert!(r.mean_q_error.is_none() && r.quantiles.is_none());
        let rate = r.empty_identification_rate.unwrap();
        assert!((0.0..=1.0).contains(&rate));
        assert!(r.to_text().contains("n/a"));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let (_, m, _) = setup();
        let w = Workload { kind: PatternKind::Substring, split: WorkloadSplit::Test, entries: vec![] };
        assert!(evaluate(&m, &w, None).is_err());
        let w = Workload::parse_tsv("prefix\tab\t1").unwrap();
        assert!(matches!(evaluate(&m, &w, None), Err(Error::KindMismatch { .. })));
    }
}
