//! Offline build and online estimation.

use std::time::Instant;

use crate::bloom::remix;
use crate::bucket::BucketScheme;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::groundtruth::PatternCatalog;
use crate::layered::{classify, BucketedKeys, LayeredFilter};
use crate::paramsel::{select_plan, trie_for, Plan, DEFAULT_M_CANDIDATES};
use crate::pattern::{PatternKind, Query};
use crate::treeindex::CompactTrie;

const COMPANION_SALT: u64 = 0x5ab5_7a1e_c0de_0001;

/// A built estimator. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    pub(crate) config: Config,
    pub(crate) kind: PatternKind,
    pub(crate) scheme: BucketScheme,
    pub(crate) dataset_size: u64,
    pub(crate) master_seed: u64,
    pub(crate) tau: u32,
    /// Filters of the non-empty buckets in `2..=tau`, ascending.
    pub(crate) filters: Vec<LayeredFilter>,
    pub(crate) trie: Option<CompactTrie>,
    /// Only present on freshly built models.
    pub(crate) plan: Option<Plan>,
    pub(crate) companion: Option<Box<EstimatorModel>>,
}

/// Factors of a long-query estimate before clamping: the leading window's
/// estimate and one `(numerator, denominator)` pair per extra byte.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTerms {
    pub first: f64,
    pub ratios: Vec<(f64, f64)>,
}

impl MarkovTerms {
    pub fn product(&self) -> f64 {
        self.ratios.iter().fold(self.first, |acc, (num, den)| acc * num / den)
    }
}

/// Bucket chosen by the prefix walk from the bucket ids of a query and its
/// successively shorter prefixes: 1 if any of them is 1 or the sequence ever
/// decreases, otherwise the first id.
pub fn prefix_walk_decision(ids: &[u32]) -> u32 {
    if ids.contains(&1) || ids.windows(2).any(|w| w[1] < w[0]) {
        1
    } else {
        ids.first().copied().unwrap_or(1)
    }
}

impl EstimatorModel {
    pub fn build<S: AsRef<[u8]>>(dataset: &[S], kind: PatternKind, config: &Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let catalog = PatternCatalog::enumerate(dataset, kind, config.max_len)?;
        let mut model = Self::build_from_catalog(&catalog, config, seed)?;
        if config.long_queries && kind != PatternKind::Substring {
            let sub_config = config.clone().with_long_queries(false);
            let sub_catalog = PatternCatalog::enumerate(dataset, PatternKind::Substring, config.max_len)?;
            let companion = Self::build_from_catalog(&sub_catalog, &sub_config, remix(seed ^ COMPANION_SALT))?;
            model.companion = Some(Box::new(companion));
        }
        Ok(model)
    }

    /// Builds from an enumerated catalog. The catalog's maximum length
    /// overrides `config.max_len`. No companion model is attached.
    pub fn build_from_catalog(catalog: &PatternCatalog, config: &Config, seed: u64) -> Result<Self> {
        let mut config = config.clone();
        config.max_len = catalog.max_len();
        config.validate()?;
        if catalog.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scheme = BucketScheme::new(config.eb, catalog.max_cardinality())?;
        let keys = BucketedKeys::new(catalog, &scheme)?;
        let plan = select_plan(&keys, &config, &DEFAULT_M_CANDIDATES)?;
        let mut filters = Vec::new();
        for choice in plan.buckets.iter().filter(|c| c.m > 0) {
            let id = choice.bucket_id;
            let negatives = keys.collect_negatives(id, config.frontier);
            filters.push(LayeredFilter::build(id, keys.bucket(id), &negatives, choice.m, choice.f, seed)?);
        }
        let trie = if plan.tau < plan.n_buckets { Some(trie_for(&keys, plan.tau)?) } else { None };
        Ok(EstimatorModel {
            kind: catalog.kind(),
            scheme,
            dataset_size: catalog.dataset_size(),
            master_seed: seed,
            tau: plan.tau,
            filters,
            trie,
            plan: Some(plan),
            companion: None,
            config,
        })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn scheme(&self) -> &BucketScheme {
        &self.scheme
    }

    pub fn max_len(&self) -> usize {
        self.config.max_len
    }

    pub fn dataset_size(&self) -> u64 {
        self.dataset_size
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn tree_threshold(&self) -> u32 {
        self.tau
    }

    pub fn filters(&self) -> &[LayeredFilter] {
        &self.filters
    }

    pub fn trie(&self) -> Option<&CompactTrie> {
        self.trie.as_ref()
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    pub fn companion(&self) -> Option<&EstimatorModel> {
        self.companion.as_deref()
    }

    /// Bucket of a canonical body, looking at the body alone.
    pub fn classify_direct(&self, body: &[u8]) -> u32 {
        classify(&self.filters, self.trie.as_ref(), body)
    }

    /// Bucket ids of `body` and each shorter prefix, longest first.
    pub fn walk_ids(&self, body: &[u8]) -> Vec<u32> {
        (1..=body.len()).rev().map(|len| self.classify_direct(&body[..len])).collect()
    }

    /// Bucket of a canonical body of at most `max_len` bytes, checking all
    /// its prefixes for consistency.
    pub fn classify_with_prefix_walk(&self, body: &[u8]) -> u32 {
        let mut first = None;
        let mut prev = 0;
        for len in (1..=body.len()).rev() {
            let id = self.classify_direct(&body[..len]);
            if id == 1 || id < prev {
                return 1;
            }
            first.get_or_insert(id);
            prev = id;
        }
        first.unwrap_or(1)
    }

    /// Estimate for a canonical body of at most `max_len` bytes.
    pub fn estimate_body(&self, body: &[u8]) -> f64 {
        self.scheme.est(self.classify_with_prefix_walk(body))
    }

    /// Estimate without the prefix walk (the query alone is classified).
    pub fn estimate_direct(&self, body: &[u8]) -> f64 {
        self.scheme.est(self.classify_direct(body))
    }

    pub fn estimate(&self, query: &Query) -> Result<f64> {
        if query.kind() != self.kind {
            return Err(Error::KindMismatch { model: self.kind, query: query.kind() });
        }
        if query.len() <= self.max_len() {
            Ok(self.estimate_body(query.body()))
        } else {
            self.markov_estimate(query)
        }
    }

    /// Estimate of a raw-literal query of this model's kind.
    pub fn estimate_raw(&self, raw: &[u8]) -> Result<f64> {
        self.estimate(&Query::new(self.kind, raw)?)
    }

    fn substring_model(&self) -> Result<&EstimatorModel> {
        match self.kind {
            PatternKind::Substring => Ok(self),
            _ => self.companion.as_deref().ok_or(Error::LongQueryUnsupported { kind: self.kind }),
        }
    }

    /// Factors of the Markov estimate of a query with at least `max_len`
    /// bytes. Each window of `max_len` bytes is conditioned on the
    /// `max_len - 1` bytes before it.
    pub fn markov_terms(&self, query: &Query) -> Result<MarkovTerms> {
        if query.kind() != self.kind {
            return Err(Error::KindMismatch { model: self.kind, query: query.kind() });
        }
        let l = self.max_len();
        let body = query.body();
        if body.len() < l {
            return Err(Error::InvalidParameter(format!("markov estimate needs at least {l} bytes, got {}", body.len())));
        }
        let first = self.estimate_body(&body[..l]);
        if body.len() == l {
            return Ok(MarkovTerms { first, ratios: Vec::new() });
        }
        let sub = self.substring_model()?;
        let reversed = self.kind == PatternKind::Suffix;
        let sub_est = |window: &[u8]| {
            if reversed {
                let raw: Vec<u8> = window.iter().rev().copied().collect();
                sub.estimate_body(&raw)
            } else {
                sub.estimate_body(window)
            }
        };
        let ratios = (l..body.len())
            .map(|i| (sub_est(&body[i + 1 - l..=i]), sub_est(&body[i + 1 - l..i])))
            .collect();
        Ok(MarkovTerms { first, ratios })
    }

    /// Long-query estimate. Each conditional ratio is clamped to at most 1
    /// and the result to at least the first bucket's estimate.
    pub fn markov_estimate(&self, query: &Query) -> Result<f64> {
        let terms = self.markov_terms(query)?;
        let est = terms.ratios.iter().fold(terms.first, |acc, (num, den)| acc * (num / den).min(1.0));
        Ok(est.max(self.scheme.est(1)))
    }

    /// Serialized size in bytes.
    pub fn size_bytes(&self) -> usize {
        self.to_bytes().len()
    }
}

/// Builds a model and reports how long it took.
pub fn timed_build<S: AsRef<[u8]>>(
    dataset: &[S],
    kind: PatternKind,
    config: &Config,
    seed: u64,
) -> Result<(EstimatorModel, f64)> {
    let start = Instant::now();
    let model = EstimatorModel::build(dataset, kind, config, seed)?;
    Ok((model, start.elapsed().as_secs_f64()))
}
