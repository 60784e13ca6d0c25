//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use dessert::{synth, Document, VectorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two unit vectors in `dim >= 2` dimensions at angle `theta`.
pub fn angle_pair(dim: usize, theta: f64) -> (Vec<f32>, Vec<f32>) {
    let mut x = vec![0.0f32; dim];
    let mut y = vec![0.0f32; dim];
    x[0] = 1.0;
    y[0] = theta.cos() as f32;
    y[1] = theta.sin() as f32;
    (x, y)
}

/// `1 - θ/π` computed entirely in f64.
pub fn angular_sim(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    1.0 - (dot / (na * nb)).clamp(-1.0, 1.0).acos() / PI
}

/// Mean over query vectors of the best similarity in `set`.
pub fn exact_max_score(query: &VectorSet, set: &VectorSet) -> f64 {
    let total: f64 = query
        .rows()
        .map(|q| set.rows().map(|x| angular_sim(q, x)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    total / query.len() as f64
}

/// Index of the best document under `exact_max_score`, lowest index on ties.
pub fn exact_top1(docs: &[Document], query: &VectorSet) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, d) in docs.iter().enumerate() {
        let s = exact_max_score(query, &d.vectors);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// `(table, code) -> vector ids` in insertion order.
pub fn naive_buckets(codes: &[Vec<u32>]) -> BTreeMap<(usize, u32), Vec<usize>> {
    let mut map: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
    for (j, c) in codes.iter().enumerate() {
        for (t, &h) in c.iter().enumerate() {
            map.entry((t, h)).or_default().push(j);
        }
    }
    map
}

/// Number of tables in which each stored vector matches the query code.
pub fn naive_counts(codes: &[Vec<u32>], query: &[u32]) -> Vec<u32> {
    codes
        .iter()
        .map(|c| c.iter().zip(query).filter(|(a, b)| a == b).count() as u32)
        .collect()
}

pub fn random_codes<R: Rng>(rng: &mut R, m: usize, num_tables: usize, range: usize) -> Vec<Vec<u32>> {
    (0..m)
        .map(|_| (0..num_tables).map(|_| rng.random_range(0..range as u32)).collect())
        .collect()
}

pub fn random_set<R: Rng>(rng: &mut R, m: usize, dim: usize) -> VectorSet {
    let data = (0..m).flat_map(|_| synth::unit_vector(rng, dim)).collect();
    VectorSet::new(dim, data).unwrap()
}
