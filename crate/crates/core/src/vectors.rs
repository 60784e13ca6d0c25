//! Dense vector sets stored row-major in a single buffer.

use crate::error::{Error, Result};

/// An ordered set of `len()` vectors, each of dimension `dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    /// Wraps a row-major buffer. `data.len()` must be a multiple of `dim`.
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                expected: (data.len() / dim + 1) * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySet)?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Checks the ingestion contract shared by documents and queries:
    /// non-empty, expected dimension, no all-zero rows.
    pub(crate) fn validate(&self, dim: usize, empty: fn() -> Error) -> Result<()> {
        if self.is_empty() {
            return Err(empty());
        }
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim,
            });
        }
        if self.rows().any(|r| r.iter().all(|&x| x == 0.0)) {
            return Err(Error::ZeroVector);
        }
        Ok(())
    }
}

/// A vector set tagged with its external identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: u64,
    pub vectors: VectorSet,
}

impl Document {
    pub fn new(id: u64, vectors: VectorSet) -> Self {
        Self { id, vectors }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_roundtrip() {
        let set = VectorSet::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.row(1), &[3.0, 4.0]);
        assert_eq!(set.rows().count(), 3);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            VectorSet::from_rows(&rows),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(VectorSet::new(3, vec![0.0; 4]).is_err());
    }

    #[test]
    fn validate_flags_zero_rows() {
        let set = VectorSet::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(set.validate(2, || Error::EmptySet), Err(Error::ZeroVector)));
        assert!(matches!(
            set.validate(3, || Error::EmptySet),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
