//! Signed random projection (SRP) hashing.
//!
//! A family holds `L` tables of `C` random hyperplanes each. Hashing a vector
//! produces one `C`-bit code per table: bit `c` of code `t` is set iff the
//! projection onto hyperplane `(t, c)` is strictly positive. For two vectors
//! at angle `θ` a single bit collides with probability `1 - θ/π`, so a full
//! `C`-bit code collides with probability `(1 - θ/π)^C`.
//!
//! Hyperplanes are drawn i.i.d. standard normal from a ChaCha8 stream seeded
//! with the family seed, so a family is fully described by `(d, C, L, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest supported number of bits per table code.
pub const MAX_HASHES_PER_TABLE: usize = 24;

/// `L` codes, one per table, each in `[0, 2^C)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashCodes(pub Vec<u32>);

impl HashCodes {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrpFamily {
    dim: usize,
    hashes_per_table: usize,
    num_tables: usize,
    seed: u64,
    /// `num_tables * hashes_per_table` rows of length `dim`, table-major.
    planes: Vec<f32>,
}

impl SrpFamily {
    pub fn sample(dim: usize, hashes_per_table: usize, num_tables: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if hashes_per_table == 0 || hashes_per_table > MAX_HASHES_PER_TABLE {
            return Err(Error::invalid(format!(
                "hashes per table must be in 1..={MAX_HASHES_PER_TABLE}, got {hashes_per_table}"
            )));
        }
        if num_tables == 0 {
            return Err(Error::invalid("number of tables must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes = (0..num_tables * hashes_per_table * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            dim,
            hashes_per_table,
            num_tables,
            seed,
            planes,
        })
    }

    /// Builds a family from explicit hyperplanes, laid out table-major.
    pub fn from_planes(dim: usize, hashes_per_table: usize, num_tables: usize, planes: Vec<f32>) -> Result<Self> {
        if dim == 0 || num_tables == 0 || hashes_per_table == 0 || hashes_per_table > MAX_HASHES_PER_TABLE {
            return Err(Error::invalid("family shape out of bounds"));
        }
        let expected = dim * hashes_per_table * num_tables;
        if planes.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: planes.len(),
            });
        }
        Ok(Self {
            dim,
            hashes_per_table,
            num_tables,
            seed: 0,
            planes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hashes_per_table(&self) -> usize {
        self.hashes_per_table
    }

    pub fn num_tables(&self) -> usize {
        self.num_tables
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of buckets per table, `2^C`.
    pub fn range(&self) -> usize {
        1usize << self.hashes_per_table
    }

    /// Hyperplane `c` of table `t`.
    pub fn plane(&self, t: usize, c: usize) -> &[f32] {
        let start = (t * self.hashes_per_table + c) * self.dim;
        &self.planes[start..start + self.dim]
    }

    pub fn hash(&self, v: &[f32]) -> Result<HashCodes> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        let mut out = vec![0u32; self.num_tables];
        self.hash_into(v, &mut out);
        Ok(HashCodes(out))
    }

    /// Unchecked hashing into a caller-provided buffer of length `L`.
    pub(crate) fn hash_into(&self, v: &[f32], out: &mut [u32]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.num_tables);
        let table_stride = self.hashes_per_table * self.dim;
        for (code, table) in out.iter_mut().zip(self.planes.chunks_exact(table_stride)) {
            let mut bits = 0u32;
            for (c, plane) in table.chunks_exact(self.dim).enumerate() {
                let dot: f32 = plane.iter().zip(v).map(|(a, b)| a * b).sum();
                if dot > 0.0 {
                    bits |= 1 << c;
                }
            }
            *code = bits;
        }
    }

    /// Hashes every row of `rows` (row-major, `dim` wide) into a flat
    /// `rows * L` buffer. Rows must already be validated.
    pub(crate) fn hash_rows(&self, rows: &[f32]) -> Vec<u32> {
        let n = rows.len() / self.dim;
        let mut out = vec![0u32; n * self.num_tables];
        for (row, codes) in rows.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.num_tables)) {
            self.hash_into(row, codes);
        }
        out
    }
}

/// Exact probability that the `C`-bit SRP codes of `x` and `y` agree in one
/// table: `(1 - θ/π)^C`.
pub fn srp_collision_probability(x: &[f32], y: &[f32], hashes_per_table: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let (mut dot, mut xx, mut yy) = (0f64, 0f64, 0f64);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos = (dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0);
    let per_bit = 1.0 - cos.acos() / std::f64::consts::PI;
    Ok(per_bit.powi(hashes_per_table as i32))
}

/// Maps a collision count `k` out of `L` tables to a similarity estimate
/// `(k/L)^(1/C)`, inverting the `sim^C` collision law of concatenated codes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLookup {
    hashes_per_table: usize,
    num_tables: usize,
    table: Vec<f64>,
}

impl SimLookup {
    pub fn new(hashes_per_table: usize, num_tables: usize) -> Result<Self> {
        if hashes_per_table == 0 || num_tables == 0 {
            return Err(Error::invalid("lookup requires C >= 1 and L >= 1"));
        }
        let inv_c = 1.0 / hashes_per_table as f64;
        let l = num_tables as f64;
        // Zero collisions has no logarithm; treat it as zero similarity.
        let table = std::iter::once(0.0)
            .chain((1..=num_tables).map(|k| (k as f64 / l).powf(inv_c)))
            .collect();
        Ok(Self {
            hashes_per_table,
            num_tables,
            table,
        })
    }

    pub fn hashes_per_table(&self) -> usize {
        self.hashes_per_table
    }

    pub fn num_tables(&self) -> usize {
        self.num_tables
    }

    /// All `L + 1` entries, indexed by collision count.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn similarity(&self, count: usize) -> f64 {
        self.table[count]
    }
}
