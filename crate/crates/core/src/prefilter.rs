//! Centroid prefiltering: spherical k-means over item vectors, an inverted
//! index from centroid to documents, and probe-and-count candidate selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

/// Unit-norm k-means centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    k: usize,
    dim: usize,
    seed: u64,
    vectors: Vec<f32>,
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalizes in place; returns false if the vector is zero.
fn normalize(v: &mut [f32]) -> bool {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    true
}

impl Centroids {
    /// Lloyd's algorithm on the unit sphere (dot-product assignment,
    /// renormalized means) from `k` distinct seeded sample points.
    pub fn train(samples: &VectorSet, k: usize, iters: usize, seed: u64) -> Result<Self> {
        let n = samples.len();
        if k == 0 || n < k {
            return Err(Error::TooFewSamples { samples: n, k });
        }
        if iters == 0 {
            return Err(Error::invalid("k-means needs at least one iteration"));
        }
        let dim = samples.dim();
        let mut points = samples.as_slice().to_vec();
        for p in points.chunks_exact_mut(dim) {
            if !normalize(p) {
                return Err(Error::ZeroVector);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::with_capacity(k * dim);
        for i in rand::seq::index::sample(&mut rng, n, k) {
            vectors.extend_from_slice(&points[i * dim..(i + 1) * dim]);
        }
        let mut centroids = Self { k, dim, seed, vectors };

        let mut assignment = vec![(0usize, 0f32); n];
        let mut sums = vec![0f64; k * dim];
        let mut sizes = vec![0usize; k];
        for _ in 0..iters {
            points
                .par_chunks_exact(dim)
                .zip(assignment.par_iter_mut())
                .for_each(|(p, slot)| *slot = centroids.nearest_with_score(p));

            sums.iter_mut().for_each(|s| *s = 0.0);
            sizes.iter_mut().for_each(|s| *s = 0);
            for (p, &(c, _)) in points.chunks_exact(dim).zip(&assignment) {
                sizes[c] += 1;
                for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                    *s += x as f64;
                }
            }

            // Points ordered from farthest to nearest, for reseeding empty clusters.
            let mut far: Vec<usize> = Vec::new();
            if sizes.contains(&0) {
                far = (0..n).collect();
                far.sort_by(|&a, &b| assignment[a].1.total_cmp(&assignment[b].1).then(a.cmp(&b)));
            }
            let mut far = far.into_iter();

            for c in 0..k {
                let target = &mut centroids.vectors[c * dim..(c + 1) * dim];
                if sizes[c] == 0 {
                    if let Some(p) = far.next() {
                        target.copy_from_slice(&points[p * dim..(p + 1) * dim]);
                    }
                    continue;
                }
                let mut mean: Vec<f32> = sums[c * dim..(c + 1) * dim].iter().map(|&s| s as f32).collect();
                // antipodal members can cancel out; keep the old centroid then
                if normalize(&mut mean) {
                    target.copy_from_slice(&mean);
                }
            }
        }
        Ok(centroids)
    }

    /// Wraps explicit centroids, normalizing each.
    pub fn from_vectors(vectors: &VectorSet, seed: u64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::TooFewSamples { samples: 0, k: 1 });
        }
        let dim = vectors.dim();
        let mut data = vectors.as_slice().to_vec();
        for c in data.chunks_exact_mut(dim) {
            if !normalize(c) {
                return Err(Error::ZeroVector);
            }
        }
        Ok(Self {
            k: vectors.len(),
            dim,
            seed,
            vectors: data,
        })
    }

    pub(crate) fn from_raw(k: usize, dim: usize, seed: u64, vectors: Vec<f32>) -> Self {
        debug_assert_eq!(vectors.len(), k * dim);
        Self { k, dim, seed, vectors }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.vectors[c * self.dim..(c + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    fn nearest_with_score(&self, v: &[f32]) -> (usize, f32) {
        let mut best = (0, f32::NEG_INFINITY);
        for (c, centroid) in self.vectors.chunks_exact(self.dim).enumerate() {
            let s = dot(centroid, v);
            if s > best.1 {
                best = (c, s);
            }
        }
        best
    }

    /// Index of the centroid with the largest dot product (lowest index on ties).
    pub fn nearest(&self, v: &[f32]) -> usize {
        self.nearest_with_score(v).0
    }

    /// The `probe` centroids with the largest dot product, best first.
    pub fn closest(&self, v: &[f32], probe: usize) -> Vec<usize> {
        let mut scored: Vec<(usize, f32)> = self
            .vectors
            .chunks_exact(self.dim)
            .map(|c| dot(c, v))
            .enumerate()
            .collect();
        let probe = probe.min(self.k);
        let cmp = |a: &(usize, f32), b: &(usize, f32)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if probe < scored.len() {
            scored.select_nth_unstable_by(probe, cmp);
            scored.truncate(probe);
        }
        scored.sort_by(cmp);
        scored.into_iter().map(|(c, _)| c).collect()
    }
}

/// Centroid id -> ascending, deduplicated document indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentroidIndex {
    num_docs: usize,
    postings: Vec<Vec<u32>>,
}

impl CentroidIndex {
    pub fn build<'a, I>(docs: I, centroids: &Centroids) -> Result<Self>
    where
        I: IntoIterator<Item = &'a VectorSet>,
    {
        let mut postings = vec![Vec::new(); centroids.k()];
        let mut num_docs = 0usize;
        let mut hit = Vec::new();
        for (i, doc) in docs.into_iter().enumerate() {
            if doc.dim() != centroids.dim() {
                return Err(Error::DimensionMismatch {
                    expected: centroids.dim(),
                    got: doc.dim(),
                });
            }
            hit.clear();
            hit.extend(doc.rows().map(|x| centroids.nearest(x)));
            hit.sort_unstable();
            hit.dedup();
            for &c in &hit {
                postings[c].push(i as u32);
            }
            num_docs = i + 1;
        }
        if num_docs == 0 {
            return Err(Error::EmptyCollection);
        }
        Ok(Self { num_docs, postings })
    }

    pub(crate) fn from_postings(num_docs: usize, postings: Vec<Vec<u32>>) -> Result<Self> {
        for p in &postings {
            if p.windows(2).any(|w| w[0] >= w[1]) || p.last().is_some_and(|&d| d as usize >= num_docs) {
                return Err(Error::Corrupt("posting list not strictly ascending within 0..N".into()));
            }
        }
        Ok(Self { num_docs, postings })
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn postings(&self) -> &[Vec<u32>] {
        &self.postings
    }

    pub fn posting(&self, c: usize) -> &[u32] {
        &self.postings[c]
    }

    /// Per-document hit counts over the `probe` closest centroids of every
    /// query vector. Returns `(doc index, count)` for touched documents.
    pub fn candidate_counts(
        &self,
        centroids: &Centroids,
        query: &VectorSet,
        probe: usize,
    ) -> Result<Vec<(usize, u32)>> {
        if probe == 0 {
            return Err(Error::invalid("probe must be >= 1"));
        }
        if query.dim() != centroids.dim() {
            return Err(Error::DimensionMismatch {
                expected: centroids.dim(),
                got: query.dim(),
            });
        }
        let mut counts = vec![0u32; self.num_docs];
        let mut touched = Vec::new();
        for q in query.rows() {
            for c in centroids.closest(q, probe) {
                for &d in &self.postings[c] {
                    let d = d as usize;
                    if counts[d] == 0 {
                        touched.push(d);
                    }
                    counts[d] += 1;
                }
            }
        }
        Ok(touched.into_iter().map(|d| (d, counts[d])).collect())
    }

    /// The `k_filter` documents with the highest counts, ties by ascending
    /// index. May return fewer when fewer documents were touched.
    pub fn filter_candidates(
        &self,
        centroids: &Centroids,
        query: &VectorSet,
        probe: usize,
        k_filter: usize,
    ) -> Result<Vec<usize>> {
        if k_filter == 0 {
            return Err(Error::invalid("k_filter must be >= 1"));
        }
        let mut scored = self.candidate_counts(centroids, query, probe)?;
        let cmp = |a: &(usize, u32), b: &(usize, u32)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
        if k_filter < scored.len() {
            scored.select_nth_unstable_by(k_filter, cmp);
            scored.truncate(k_filter);
        }
        scored.sort_by(cmp);
        Ok(scored.into_iter().map(|(d, _)| d).collect())
    }
}

/// Trained centroids plus the document inverted index built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefilter {
    pub centroids: Centroids,
    pub index: CentroidIndex,
}

impl Prefilter {
    pub fn candidates(&self, query: &VectorSet, probe: usize, k_filter: usize) -> Result<Vec<usize>> {
        self.index.filter_candidates(&self.centroids, query, probe, k_filter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn set(rows: &[&[f32]]) -> VectorSet {
        VectorSet::from_rows(rows).unwrap()
    }

    fn axes(d: usize) -> Centroids {
        let rows: Vec<Vec<f32>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Centroids::from_vectors(&VectorSet::from_rows(&rows).unwrap(), 0).unwrap()
    }

    fn angle(a: &[f32], b: &[f32]) -> f64 {
        let d = dot(a, b) as f64;
        let na = dot(a, a).sqrt() as f64;
        let nb = dot(b, b).sqrt() as f64;
        (d / (na * nb)).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn k_equals_n_recovers_points() {
        let samples = set(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0], &[1.0, 1.0, 1.0]]);
        let c = Centroids::train(&samples, 4, 5, 11).unwrap();
        for row in samples.rows() {
            let best = c.centroid(c.nearest(row));
            assert!(angle(best, row) < 1e-6);
        }
    }

    #[test]
    fn single_cluster_is_mean_direction() {
        let samples = set(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let c = Centroids::train(&samples, 1, 3, 0).unwrap();
        let h = 0.5f32.sqrt();
        let mean = [1.0 + h, 1.0 + h];
        assert!(angle(c.centroid(0), &mean) < 1e-6);
        let norm: f32 = dot(c.centroid(0), c.centroid(0));
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 8;
        let mu_a: Vec<f32> = (0..d).map(|i| if i == 0 { 1.0 } else { 0.1 }).collect();
        let mu_b: Vec<f32> = (0..d).map(|i| if i == 1 { -1.0 } else { -0.1 }).collect();
        let mut rows = Vec::new();
        for mu in [&mu_a, &mu_b] {
            for _ in 0..100 {
                rows.push(
                    mu.iter()
                        .map(|&m| m + 0.1 * rng.sample::<f32, _>(StandardNormal))
                        .collect::<Vec<f32>>(),
                );
            }
        }
        let samples = VectorSet::from_rows(&rows).unwrap();
        let c = Centroids::train(&samples, 2, 10, 1).unwrap();
        // direct two-cluster oracle: each cluster's true mean is its planted mean
        for mu in [&mu_a, &mu_b] {
            let best = (0..2).map(|i| angle(c.centroid(i), mu)).fold(f64::INFINITY, f64::min);
            assert!(best < 0.1, "angle {best}");
        }
    }

    #[test]
    fn training_errors_and_determinism() {
        let samples = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            Centroids::train(&samples, 3, 1, 0),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(Centroids::train(&samples, 0, 1, 0).is_err());
        assert!(Centroids::train(&samples, 1, 0, 0).is_err());
        let zero = set(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(Centroids::train(&zero, 1, 1, 0), Err(Error::ZeroVector)));

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows: Vec<Vec<f32>> = (0..200)
            .map(|_| (0..6).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let s = VectorSet::from_rows(&rows).unwrap();
        assert_eq!(
            Centroids::train(&s, 7, 5, 3).unwrap(),
            Centroids::train(&s, 7, 5, 3).unwrap()
        );
    }

    #[test]
    fn postings_use_set_semantics() {
        let c = axes(4);
        let docs = vec![
            set(&[&[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 2.0]]),
            set(&[&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]]),
            set(&[&[0.0, 1.0, 0.1, 0.0], &[0.0, 1.0, 0.1, 0.0]]),
        ];
        let idx = CentroidIndex::build(&docs, &c).unwrap();
        assert_eq!(idx.posting(0), &[] as &[u32]);
        assert_eq!(idx.posting(1), &[1, 2]);
        assert_eq!(idx.posting(2), &[1]);
        assert_eq!(idx.posting(3), &[0]);

        let single = CentroidIndex::build(&docs[..1], &c).unwrap();
        assert_eq!(single.postings().iter().filter(|p| !p.is_empty()).count(), 1);
        assert_eq!(single.posting(3), &[0]);

        assert!(matches!(
            CentroidIndex::build(&[set(&[&[1.0, 0.0]])], &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn filter_prefers_overlapping_doc() {
        let c = axes(4);
        let docs = vec![
            set(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]),
            set(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]),
        ];
        let idx = CentroidIndex::build(&docs, &c).unwrap();
        let q = set(&[&[1.0, 0.1, 0.0, 0.0], &[0.1, 1.0, 0.0, 0.0]]);
        assert_eq!(idx.filter_candidates(&c, &q, 1, 1).unwrap(), vec![1]);
        // exhaustive count oracle
        let probed: Vec<usize> = q.rows().flat_map(|r| c.closest(r, 1)).collect();
        let count = |doc: usize| {
            probed
                .iter()
                .filter(|&&cc| idx.posting(cc).contains(&(doc as u32)))
                .count()
        };
        assert_eq!((count(0), count(1)), (0, 2));

        assert_eq!(idx.filter_candidates(&c, &q, 4, 10).unwrap(), vec![0, 1]);
        assert!(matches!(
            idx.filter_candidates(&c, &q, 0, 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            idx.filter_candidates(&c, &q, 1, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn closest_orders_by_score() {
        let c = axes(3);
        assert_eq!(c.closest(&[0.2, 0.5, 0.9], 2), vec![2, 1]);
        assert_eq!(c.closest(&[0.2, 0.5, 0.9], 10), vec![2, 1, 0]);
        assert_eq!(c.closest(&[1.0, 1.0, 0.0], 1), vec![0]);
    }
}
