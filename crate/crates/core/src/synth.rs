//! Seeded synthetic corpora for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vectors::{Document, VectorSet};

/// Default per-component query noise, relative to the vector norm.
pub const DEFAULT_NOISE: f32 = 0.05;

/// A uniformly random direction on the unit sphere.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `n` documents (ids `0..n`) of `m` random unit vectors each.
pub fn random_documents(n: usize, m: usize, dim: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let data = (0..m).flat_map(|_| unit_vector(&mut rng, dim)).collect();
            Document::new(i as u64, VectorSet::new(dim, data).expect("dim >= 1"))
        })
        .collect()
}

/// Adds i.i.d. Gaussian noise with standard deviation `scale * ‖x‖` to every
/// component of every vector.
pub fn noisy_copy<R: Rng + ?Sized>(set: &VectorSet, scale: f32, rng: &mut R) -> VectorSet {
    let dim = set.dim();
    let mut data = Vec::with_capacity(set.as_slice().len());
    for row in set.rows() {
        let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
        let sd = scale * norm;
        loop {
            let noisy: Vec<f32> = row
                .iter()
                .map(|&x| x + sd * rng.sample::<f32, _>(StandardNormal))
                .collect();
            if noisy.iter().any(|&x| x != 0.0) {
                data.extend(noisy);
                break;
            }
        }
    }
    VectorSet::new(dim, data).expect("shape preserved")
}

/// Documents drawn around planted cluster centers: each document picks
/// `clusters_per_doc` centers and spreads its `m` vectors over them, each
/// vector being `center + spread * N(0, I/d)`.
pub fn clustered_documents(
    n: usize,
    m: usize,
    dim: usize,
    clusters: usize,
    clusters_per_doc: usize,
    spread: f32,
    seed: u64,
) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f32>> = (0..clusters).map(|_| unit_vector(&mut rng, dim)).collect();
    let sd = spread / (dim as f32).sqrt();
    (0..n)
        .map(|i| {
            let picks: Vec<usize> = (0..clusters_per_doc.max(1))
                .map(|_| rng.random_range(0..clusters))
                .collect();
            let mut data = Vec::with_capacity(m * dim);
            for j in 0..m {
                let center = &centers[picks[j % picks.len()]];
                data.extend(center.iter().map(|&c| c + sd * rng.sample::<f32, _>(StandardNormal)));
            }
            Document::new(i as u64, VectorSet::new(dim, data).expect("dim >= 1"))
        })
        .collect()
}
