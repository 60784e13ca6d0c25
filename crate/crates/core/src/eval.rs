//! Retrieval quality metrics and latency summaries.

use std::collections::BTreeSet;
use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::index::{DessertIndex, SearchParams};
use crate::ranking::RankedResults;
use crate::storage::Qrels;
use crate::vectors::Document;

/// 1 if any relevant document is among the first `k` results, else 0.
pub fn hit_at_k(ranked: &RankedResults, relevant: &BTreeSet<u64>, k: usize) -> f64 {
    let hit = ranked.entries.iter().take(k).any(|e| relevant.contains(&e.doc_id));
    if hit {
        1.0
    } else {
        0.0
    }
}

/// `1/rank` of the first relevant document within the first `cutoff`
/// results, 0 if there is none.
pub fn reciprocal_rank(ranked: &RankedResults, relevant: &BTreeSet<u64>, cutoff: usize) -> f64 {
    ranked
        .entries
        .iter()
        .take(cutoff)
        .position(|e| relevant.contains(&e.doc_id))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Nearest-rank percentile (`p` in `[0, 100]`) of unsorted samples.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    /// `recall[i]` is recall at `ks[i]`.
    pub recall: Vec<f64>,
    pub mrr_at_10: f64,
    /// Wall-clock milliseconds per evaluated query, in query order.
    pub latencies_ms: Vec<f64>,
    pub evaluated: usize,
    /// Query ids present in the qrels but absent from the query file.
    pub unknown_qrels: Vec<u64>,
    /// Query ids without any judgments.
    pub unjudged: Vec<u64>,
    pub params: Vec<(String, String)>,
}

impl EvalReport {
    pub fn p50(&self) -> f64 {
        percentile(&self.latencies_ms, 50.0)
    }

    pub fn p95(&self) -> f64 {
        percentile(&self.latencies_ms, 95.0)
    }

    pub fn p99(&self) -> f64 {
        percentile(&self.latencies_ms, 99.0)
    }

    pub fn mean_latency(&self) -> f64 {
        if self.latencies_ms.is_empty() {
            0.0
        } else {
            self.latencies_ms.iter().sum::<f64>() / self.latencies_ms.len() as f64
        }
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }
}

/// Runs every judged query against the index and aggregates recall@k for
/// each `k`, MRR@10 and per-query latency.
pub fn evaluate(
    index: &DessertIndex,
    queries: &[Document],
    qrels: &Qrels,
    ks: &[usize],
    params: &SearchParams,
) -> Result<EvalReport> {
    if ks.contains(&0) {
        return Err(Error::invalid("recall cutoffs must be >= 1"));
    }
    let depth = ks.iter().copied().max().unwrap_or(0).max(10).max(params.top_k);
    let search = SearchParams {
        top_k: depth,
        ..params.clone()
    };

    let known: BTreeSet<u64> = queries.iter().map(|q| q.id).collect();
    let unknown_qrels: Vec<u64> = qrels.keys().copied().filter(|q| !known.contains(q)).collect();
    if !unknown_qrels.is_empty() {
        warn!(
            "{} qrels query ids have no matching query; excluded",
            unknown_qrels.len()
        );
    }
    if qrels.is_empty() {
        warn!("qrels are empty; no queries evaluated");
    }

    let mut hits = vec![0.0; ks.len()];
    let mut rr = 0.0;
    let mut latencies_ms = Vec::new();
    let mut unjudged = Vec::new();
    for q in queries {
        let Some(relevant) = qrels.get(&q.id) else {
            unjudged.push(q.id);
            continue;
        };
        let start = Instant::now();
        let ranked = index.query(&q.vectors, &search)?;
        latencies_ms.push(start.elapsed().as_secs_f64() * 1e3);
        for (h, &k) in hits.iter_mut().zip(ks) {
            *h += hit_at_k(&ranked, relevant, k);
        }
        rr += reciprocal_rank(&ranked, relevant, 10);
    }
    if !unjudged.is_empty() && !qrels.is_empty() {
        warn!("{} queries have no judgments; excluded", unjudged.len());
    }

    let evaluated = latencies_ms.len();
    let mean = |x: f64| if evaluated == 0 { 0.0 } else { x / evaluated as f64 };
    let cfg = index.config();
    Ok(EvalReport {
        ks: ks.to_vec(),
        recall: hits.into_iter().map(mean).collect(),
        mrr_at_10: mean(rr),
        latencies_ms,
        evaluated,
        unknown_qrels,
        unjudged,
        params: vec![
            ("C".into(), cfg.hashes_per_table.to_string()),
            ("L".into(), cfg.num_tables.to_string()),
            ("prefilter".into(), index.prefilter().is_some().to_string()),
            ("probe".into(), params.probe.unwrap_or(cfg.prefilter.probe).to_string()),
            (
                "k_filter".into(),
                params.k_filter.unwrap_or(cfg.prefilter.k_filter).to_string(),
            ),
            ("depth".into(), depth.to_string()),
        ],
    })
}
