//! The set index: one TinyTable sketch per document, a shared hash family,
//! the count-to-similarity lookup and an optional centroid prefilter.
//!
//! Querying hashes each query vector once, then for every candidate set
//! counts per-vector collisions over the `L` tables, maps counts to
//! similarity estimates, applies the inner aggregation per query vector and
//! takes the weighted mean.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lsh::{HashCodes, SimLookup, SrpFamily};
use crate::prefilter::{CentroidIndex, Centroids, Prefilter};
use crate::ranking::{RankedResults, TopK};
use crate::scoring::{InnerAggregation, OuterWeights, Scorer};
use crate::sketch::{tiny_table_bytes, TinyTable};
use crate::vectors::{Document, VectorSet};

/// Upper bound on the number of item vectors used to train centroids.
pub const MAX_TRAINING_SAMPLES: usize = 1 << 20;

const CENTROID_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefilterConfig {
    pub enabled: bool,
    /// Number of centroids; `None` picks `⌈√(total vectors)⌉`.
    pub centroids: Option<usize>,
    pub iters: usize,
    /// Default number of probed centroids per query vector.
    pub probe: usize,
    /// Default number of candidates kept after filtering.
    pub k_filter: usize,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            centroids: None,
            iters: 10,
            probe: 1,
            k_filter: 4096,
        }
    }
}

impl PrefilterConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Named hyperparameter presets tuned for passage retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Profile {
    pub name: &'static str,
    pub hashes_per_table: usize,
    pub num_tables: usize,
    pub k_filter: usize,
    pub probe: usize,
}

pub const PROFILES: [Profile; 4] = [
    Profile {
        name: "msmarco-k10-fast",
        hashes_per_table: 7,
        num_tables: 32,
        k_filter: 4096,
        probe: 1,
    },
    Profile {
        name: "msmarco-k10-accurate",
        hashes_per_table: 7,
        num_tables: 64,
        k_filter: 4096,
        probe: 2,
    },
    Profile {
        name: "msmarco-k1000-fast",
        hashes_per_table: 6,
        num_tables: 32,
        k_filter: 8192,
        probe: 4,
    },
    Profile {
        name: "msmarco-k1000-accurate",
        hashes_per_table: 7,
        num_tables: 32,
        k_filter: 16384,
        probe: 4,
    },
];

impl Profile {
    pub fn by_name(name: &str) -> Option<Profile> {
        PROFILES.iter().copied().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    pub dim: usize,
    pub hashes_per_table: usize,
    pub num_tables: usize,
    pub seed: u64,
    pub inner: InnerAggregation,
    pub prefilter: PrefilterConfig,
}

impl IndexConfig {
    /// The default `msmarco-k10-fast` preset for `dim`-dimensional vectors.
    pub fn new(dim: usize) -> Self {
        Self::from_profile(dim, &PROFILES[0])
    }

    pub fn from_profile(dim: usize, profile: &Profile) -> Self {
        Self {
            dim,
            hashes_per_table: profile.hashes_per_table,
            num_tables: profile.num_tables,
            seed: 0,
            inner: InnerAggregation::Max,
            prefilter: PrefilterConfig {
                probe: profile.probe,
                k_filter: profile.k_filter,
                ..PrefilterConfig::default()
            },
        }
    }

    pub fn with_tables(mut self, hashes_per_table: usize, num_tables: usize) -> Self {
        self.hashes_per_table = hashes_per_table;
        self.num_tables = num_tables;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_prefilter(mut self, prefilter: PrefilterConfig) -> Self {
        self.prefilter = prefilter;
        self
    }

    pub fn with_inner(mut self, inner: InnerAggregation) -> Self {
        self.inner = inner;
        self
    }

    /// Hash range `r = 2^C`.
    pub fn range(&self) -> usize {
        1usize << self.hashes_per_table
    }
}

/// Per-query knobs. Unset prefilter values fall back to the index config.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub top_k: usize,
    pub probe: Option<usize>,
    pub k_filter: Option<usize>,
    pub weights: Option<OuterWeights>,
    /// Score candidates on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl SearchParams {
    pub fn top_k(top_k: usize) -> Self {
        Self {
            top_k,
            probe: None,
            k_filter: None,
            weights: None,
            parallel: false,
        }
    }

    pub fn with_filter(mut self, probe: usize, k_filter: usize) -> Self {
        self.probe = Some(probe);
        self.k_filter = Some(k_filter);
        self
    }

    pub fn with_weights(mut self, weights: OuterWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }
}

/// Reusable per-worker accumulator, sized to the largest set.
struct Scratch {
    counts: Vec<u32>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(max_m: usize) -> Self {
        Self {
            counts: vec![0; max_m],
            touched: Vec::with_capacity(max_m),
        }
    }
}

/// A query hashed once and ready to be scored against any sketch.
struct PreparedQuery<'a> {
    codes: Vec<u32>,
    num_tables: usize,
    weights: &'a [f64],
    /// `transformed[k]` = per-element inner contribution at `k` collisions.
    transformed: Vec<f64>,
    inner: InnerAggregation,
}

impl PreparedQuery<'_> {
    fn score(&self, sketch: &TinyTable, scratch: &mut Scratch) -> f64 {
        let m = sketch.m();
        let mut total = 0.0;
        for (q_codes, &w) in self.codes.chunks_exact(self.num_tables).zip(self.weights) {
            scratch.touched.clear();
            sketch.accumulate_touched(q_codes, &mut scratch.counts[..m], &mut scratch.touched);
            // Untouched vectors have zero collisions, which contribute zero.
            let agg = match self.inner {
                InnerAggregation::Max => {
                    let mut best = 0u32;
                    for &j in &scratch.touched {
                        best = best.max(scratch.counts[j as usize]);
                        scratch.counts[j as usize] = 0;
                    }
                    self.transformed[best as usize]
                }
                InnerAggregation::AvgPhi(_) => {
                    let mut sum = 0.0;
                    for &j in &scratch.touched {
                        sum += self.transformed[scratch.counts[j as usize] as usize];
                        scratch.counts[j as usize] = 0;
                    }
                    sum / m as f64
                }
            };
            total += w * agg;
        }
        total / self.weights.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DessertIndex {
    config: IndexConfig,
    family: SrpFamily,
    lookup: SimLookup,
    sketches: Vec<TinyTable>,
    doc_ids: Vec<u64>,
    filter: Option<Prefilter>,
    max_m: usize,
}

impl DessertIndex {
    pub fn build(docs: &[Document], config: IndexConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCollection);
        }
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in docs {
            doc.vectors.validate(config.dim, || Error::EmptySet)?;
            if !seen.insert(doc.id) {
                return Err(Error::invalid(format!("duplicate document id {}", doc.id)));
            }
        }

        let family = SrpFamily::sample(config.dim, config.hashes_per_table, config.num_tables, config.seed)?;
        let range = config.range();
        let sketches = docs
            .par_iter()
            .map(|doc| {
                let codes = family.hash_rows(doc.vectors.as_slice());
                TinyTable::from_flat_codes(&codes, config.num_tables, range)
            })
            .collect::<Result<Vec<_>>>()?;

        let filter = if config.prefilter.enabled {
            Some(build_prefilter(docs, &config)?)
        } else {
            None
        };

        Self::assemble(config, family, sketches, docs.iter().map(|d| d.id).collect(), filter)
    }

    /// Assembles an index from persisted parts, regenerating the family.
    pub(crate) fn from_parts(
        config: IndexConfig,
        sketches: Vec<TinyTable>,
        doc_ids: Vec<u64>,
        filter: Option<Prefilter>,
    ) -> Result<Self> {
        if sketches.is_empty() {
            return Err(Error::EmptyCollection);
        }
        if sketches.len() != doc_ids.len() {
            return Err(Error::LengthMismatch {
                expected: sketches.len(),
                got: doc_ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(doc_ids.len());
        if let Some(id) = doc_ids.iter().find(|&&id| !seen.insert(id)) {
            return Err(Error::Corrupt(format!("duplicate document id {id}")));
        }
        if let Some(s) = sketches
            .iter()
            .find(|s| s.num_tables() != config.num_tables || s.range() != config.range())
        {
            return Err(Error::CorruptSketch(format!(
                "sketch shape (L={}, r={}) does not match config (L={}, r={})",
                s.num_tables(),
                s.range(),
                config.num_tables,
                config.range()
            )));
        }
        if let Some(f) = &filter {
            if f.index.num_docs() != sketches.len() || f.centroids.dim() != config.dim {
                return Err(Error::Corrupt("prefilter does not match the indexed collection".into()));
            }
        }
        let family = SrpFamily::sample(config.dim, config.hashes_per_table, config.num_tables, config.seed)?;
        Self::assemble(config, family, sketches, doc_ids, filter)
    }

    fn assemble(
        config: IndexConfig,
        family: SrpFamily,
        sketches: Vec<TinyTable>,
        doc_ids: Vec<u64>,
        filter: Option<Prefilter>,
    ) -> Result<Self> {
        let lookup = SimLookup::new(config.hashes_per_table, config.num_tables)?;
        let max_m = sketches.iter().map(TinyTable::m).max().unwrap_or(0);
        Ok(Self {
            config,
            family,
            lookup,
            sketches,
            doc_ids,
            filter,
            max_m,
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn family(&self) -> &SrpFamily {
        &self.family
    }

    pub fn lookup(&self) -> &SimLookup {
        &self.lookup
    }

    pub fn sketches(&self) -> &[TinyTable] {
        &self.sketches
    }

    pub fn doc_ids(&self) -> &[u64] {
        &self.doc_ids
    }

    pub fn prefilter(&self) -> Option<&Prefilter> {
        self.filter.as_ref()
    }

    /// Number of indexed sets `N`.
    pub fn len(&self) -> usize {
        self.sketches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sketches.is_empty()
    }

    /// Set cardinalities `m_i`.
    pub fn sizes(&self) -> Vec<usize> {
        self.sketches.iter().map(TinyTable::m).collect()
    }

    pub fn total_vectors(&self) -> usize {
        self.sketches.iter().map(TinyTable::m).sum()
    }

    /// Sum of per-set sketch sizes under the packed layout.
    pub fn sketch_bytes(&self) -> usize {
        self.sketches
            .iter()
            .map(|s| tiny_table_bytes(s.m(), s.range(), s.num_tables()))
            .sum()
    }

    /// Hashes every query vector once.
    pub fn hash_query(&self, query: &VectorSet) -> Result<Vec<HashCodes>> {
        query.validate(self.config.dim, || Error::EmptyQuery)?;
        Ok(query
            .as_slice()
            .chunks_exact(self.config.dim)
            .map(|row| {
                let mut out = vec![0u32; self.config.num_tables];
                self.family.hash_into(row, &mut out);
                HashCodes(out)
            })
            .collect())
    }

    fn prepare<'a>(&self, codes: Vec<u32>, inner: InnerAggregation, weights: &'a [f64]) -> PreparedQuery<'a> {
        let transformed = self.lookup.table().iter().map(|&s| inner.transform(s)).collect();
        PreparedQuery {
            codes,
            num_tables: self.config.num_tables,
            weights,
            transformed,
            inner,
        }
    }

    /// Estimated relevance of set `i` for pre-hashed query codes.
    pub fn score_candidate(&self, i: usize, query_codes: &[HashCodes], scorer: &Scorer) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if query_codes.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let range = self.config.range();
        let mut flat = Vec::with_capacity(query_codes.len() * self.config.num_tables);
        for codes in query_codes {
            if codes.len() != self.config.num_tables {
                return Err(Error::LengthMismatch {
                    expected: self.config.num_tables,
                    got: codes.len(),
                });
            }
            if let Some(&code) = codes.as_slice().iter().find(|&&c| c as usize >= range) {
                return Err(Error::CodeOutOfRange { code, range });
            }
            flat.extend_from_slice(codes.as_slice());
        }
        let weights = scorer.weights_for(query_codes.len())?;
        let prepared = self.prepare(flat, scorer.inner, weights.as_slice());
        Ok(prepared.score(&self.sketches[i], &mut Scratch::new(self.max_m)))
    }

    /// Candidate set indices for a query: the prefilter shortlist when
    /// enabled, otherwise every set.
    pub fn candidates(&self, query: &VectorSet, params: &SearchParams) -> Result<Vec<usize>> {
        match &self.filter {
            Some(f) => f.candidates(
                query,
                params.probe.unwrap_or(self.config.prefilter.probe),
                params.k_filter.unwrap_or(self.config.prefilter.k_filter),
            ),
            None => Ok((0..self.len()).collect()),
        }
    }

    pub fn query(&self, query: &VectorSet, params: &SearchParams) -> Result<RankedResults> {
        if params.top_k == 0 {
            return Err(Error::invalid("top_k must be >= 1"));
        }
        query.validate(self.config.dim, || Error::EmptyQuery)?;
        let codes = self.family.hash_rows(query.as_slice());
        let scorer = Scorer {
            inner: self.config.inner,
            weights: params.weights.clone(),
        };
        let weights = scorer.weights_for(query.len())?;
        let prepared = self.prepare(codes, self.config.inner, weights.as_slice());
        let candidates = self.candidates(query, params)?;

        let mut top = TopK::new(params.top_k);
        if params.parallel {
            let scored: Vec<(usize, f64)> = candidates
                .par_iter()
                .map_init(
                    || Scratch::new(self.max_m),
                    |scratch, &i| (i, prepared.score(&self.sketches[i], scratch)),
                )
                .collect();
            for (i, s) in scored {
                top.push(self.doc_ids[i], s);
            }
        } else {
            let mut scratch = Scratch::new(self.max_m);
            for i in candidates {
                top.push(self.doc_ids[i], prepared.score(&self.sketches[i], &mut scratch));
            }
        }
        Ok(top.into_results())
    }
}

fn build_prefilter(docs: &[Document], config: &IndexConfig) -> Result<Prefilter> {
    let total: usize = docs.iter().map(|d| d.vectors.len()).sum();
    let samples = if total <= MAX_TRAINING_SAMPLES {
        let mut data = Vec::with_capacity(total * config.dim);
        for d in docs {
            data.extend_from_slice(d.vectors.as_slice());
        }
        VectorSet::new(config.dim, data)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ CENTROID_SEED_SALT);
        let mut picks = rand::seq::index::sample(&mut rng, total, MAX_TRAINING_SAMPLES).into_vec();
        picks.sort_unstable();
        let mut data = Vec::with_capacity(MAX_TRAINING_SAMPLES * config.dim);
        let mut picks = picks.into_iter().peekable();
        let mut offset = 0usize;
        for d in docs {
            let m = d.vectors.len();
            while let Some(&p) = picks.peek() {
                if p >= offset + m {
                    break;
                }
                data.extend_from_slice(d.vectors.row(p - offset));
                picks.next();
            }
            offset += m;
        }
        VectorSet::new(config.dim, data)?
    };
    let k = config
        .prefilter
        .centroids
        .unwrap_or_else(|| (total as f64).sqrt().ceil() as usize)
        .clamp(1, samples.len());
    let centroids = Centroids::train(
        &samples,
        k,
        config.prefilter.iters.max(1),
        config.seed ^ CENTROID_SEED_SALT,
    )?;
    let index = CentroidIndex::build(docs.iter().map(|d| &d.vectors), &centroids)?;
    Ok(Prefilter { centroids, index })
}
