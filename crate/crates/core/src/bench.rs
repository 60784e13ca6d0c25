//! Synthetic speed/accuracy comparison against exact brute-force scoring.
//!
//! For each set size `m`, `n` random sets of `m` unit vectors are indexed
//! with `L = 8` tables of `C = ⌊log2 m⌋ + 1` bits and no prefilter. Queries
//! are noisy copies of indexed sets; both the index and the exact oracle
//! answer each query and we record mean latency and top-1 agreement.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{DessertIndex, IndexConfig, PrefilterConfig, SearchParams};
use crate::lsh::MAX_HASHES_PER_TABLE;
use crate::oracle::brute_force_search;
use crate::scoring::Scorer;
use crate::synth;

pub const BENCH_TABLES: usize = 8;

pub const BENCH_CSV_HEADER: &str = "m,C,L,queries,dessert_ms,brute_ms,speedup,top1_agreement";

/// Cap on exact-oracle work per set size, in query-vector × item-vector pairs.
const BRUTE_PAIR_BUDGET: usize = 1 << 25;
const MIN_QUERIES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchConfig {
    pub set_sizes: Vec<usize>,
    pub num_sets: usize,
    pub dim: usize,
    pub seed: u64,
    pub noise: f32,
    /// Upper bound on queries per set size. Large `m` uses fewer so the
    /// brute-force side stays within a fixed work budget.
    pub max_queries: usize,
}

impl Default for SyntheticBenchConfig {
    fn default() -> Self {
        Self {
            set_sizes: vec![2, 4, 8, 16, 32, 64, 128, 256],
            num_sets: 1000,
            dim: 32,
            seed: 0,
            noise: synth::DEFAULT_NOISE,
            max_queries: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchRow {
    pub m: usize,
    pub hashes_per_table: usize,
    pub num_tables: usize,
    pub queries: usize,
    /// Mean wall-clock per query.
    pub dessert_ms: f64,
    pub brute_ms: f64,
    pub top1_agreement: f64,
}

impl SyntheticBenchRow {
    pub fn speedup(&self) -> f64 {
        self.brute_ms / self.dessert_ms
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.3},{:.4}",
            self.m,
            self.hashes_per_table,
            self.num_tables,
            self.queries,
            self.dessert_ms,
            self.brute_ms,
            self.speedup(),
            self.top1_agreement
        )
    }
}

/// `⌊log2 m⌋ + 1`, capped at the widest supported code.
pub fn bench_hashes_per_table(m: usize) -> usize {
    ((usize::BITS - m.max(1).leading_zeros()) as usize).min(MAX_HASHES_PER_TABLE)
}

fn queries_for(cfg: &SyntheticBenchConfig, m: usize) -> usize {
    let by_budget = BRUTE_PAIR_BUDGET / (cfg.num_sets * m * m).max(1);
    by_budget.max(MIN_QUERIES).min(cfg.max_queries).min(cfg.num_sets).max(1)
}

pub fn run_one(cfg: &SyntheticBenchConfig, m: usize) -> Result<SyntheticBenchRow> {
    let seed = cfg.seed ^ (m as u64).wrapping_mul(0x2545_f491_4f6c_dd1d);
    let docs = synth::random_documents(cfg.num_sets, m, cfg.dim, seed);
    let hashes_per_table = bench_hashes_per_table(m);
    let config = IndexConfig::new(cfg.dim)
        .with_tables(hashes_per_table, BENCH_TABLES)
        .with_seed(seed)
        .with_prefilter(PrefilterConfig::disabled());
    let index = DessertIndex::build(&docs, config)?;

    let nq = queries_for(cfg, m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let picks = rand::seq::index::sample(&mut rng, cfg.num_sets, nq).into_vec();
    let queries: Vec<_> = picks
        .iter()
        .map(|&i| synth::noisy_copy(&docs[i].vectors, cfg.noise, &mut rng))
        .collect();

    let params = SearchParams::top_k(1);
    let scorer = Scorer::default();
    // warm caches and allocator before timing
    index.query(&queries[0], &params)?;

    let mut dessert = 0.0;
    let mut brute = 0.0;
    let mut agree = 0usize;
    for q in &queries {
        let t = Instant::now();
        let fast = index.query(q, &params)?;
        dessert += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let exact = brute_force_search(&docs, q, 1, &scorer)?;
        brute += t.elapsed().as_secs_f64();
        if fast.top() == exact.top() {
            agree += 1;
        }
    }
    let n = queries.len() as f64;
    Ok(SyntheticBenchRow {
        m,
        hashes_per_table,
        num_tables: BENCH_TABLES,
        queries: queries.len(),
        dessert_ms: dessert * 1e3 / n,
        brute_ms: brute * 1e3 / n,
        top1_agreement: agree as f64 / n,
    })
}

pub fn run_synthetic_bench(cfg: &SyntheticBenchConfig) -> Result<Vec<SyntheticBenchRow>> {
    if cfg.set_sizes.is_empty() || cfg.set_sizes.contains(&0) {
        return Err(Error::invalid(
            "set sizes must be a non-empty list of positive integers",
        ));
    }
    if cfg.num_sets == 0 || cfg.dim == 0 || cfg.max_queries == 0 {
        return Err(Error::invalid("n, d and the query count must be positive"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::invalid("noise must be a non-negative finite number"));
    }
    cfg.set_sizes.iter().map(|&m| run_one(cfg, m)).collect()
}
