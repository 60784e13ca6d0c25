//! Exact brute-force reference scoring with angular similarity
//! `1 - θ/π`. Kept independent of the hashing code on purpose; this is the
//! ground truth the estimator is tested against.

use crate::error::{Error, Result};
use crate::ranking::{RankedResults, TopK};
use crate::scoring::{outer_aggregate, Scorer};
use crate::vectors::{Document, VectorSet};

/// `m_q × m` matrix of angular similarities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.data[j * self.cols + l]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }
}

fn norms(set: &VectorSet) -> Result<Vec<f64>> {
    set.rows()
        .map(|r| {
            let n = r.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if n == 0.0 {
                Err(Error::ZeroVector)
            } else {
                Ok(n)
            }
        })
        .collect()
}

pub fn exact_pairwise_sims(query: &VectorSet, set: &VectorSet) -> Result<SimilarityMatrix> {
    if query.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: query.dim(),
        });
    }
    let qn = norms(query)?;
    let sn = norms(set)?;
    let mut data = Vec::with_capacity(query.len() * set.len());
    for (q, &nq) in query.rows().zip(&qn) {
        for (x, &nx) in set.rows().zip(&sn) {
            let dot: f64 = q.iter().zip(x).map(|(&a, &b)| a as f64 * b as f64).sum();
            let cos = (dot / (nq * nx)).clamp(-1.0, 1.0);
            data.push(1.0 - cos.acos() / std::f64::consts::PI);
        }
    }
    Ok(SimilarityMatrix {
        rows: query.len(),
        cols: set.len(),
        data,
    })
}

/// `F(Q, S)`: the inner aggregation applied to each row, then the weighted mean.
pub fn exact_relevance(query: &VectorSet, set: &VectorSet, scorer: &Scorer) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let sims = exact_pairwise_sims(query, set)?;
    let per_query = (0..sims.rows())
        .map(|j| scorer.inner.apply(sims.row(j)))
        .collect::<Result<Vec<_>>>()?;
    outer_aggregate(&per_query, &scorer.weights_for(query.len())?)
}

/// Scores every document exactly and returns the best `top_k`.
pub fn brute_force_search(
    docs: &[Document],
    query: &VectorSet,
    top_k: usize,
    scorer: &Scorer,
) -> Result<RankedResults> {
    if docs.is_empty() {
        return Err(Error::EmptyCollection);
    }
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if top_k == 0 {
        return Err(Error::invalid("top_k must be >= 1"));
    }
    let mut top = TopK::new(top_k);
    for doc in docs {
        top.push(doc.id, exact_relevance(query, &doc.vectors, scorer)?);
    }
    Ok(top.into_results())
}
