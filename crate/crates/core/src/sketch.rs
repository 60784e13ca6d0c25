//! TinyTable: a static, byte-packed per-set hash table.
//!
//! For each of the `L` tables the sketch stores `r + 1` offsets and a
//! permutation of the `m` vector ids, grouped by bucket. Bucket `(t, h)` is
//! `ids[t][offsets[t][h]..offsets[t][h + 1]]`. Integers use the narrowest
//! width that fits: offsets reach `m` inclusive, ids reach `m - 1`.
//!
//! Serialized layout (little-endian), [`HEADER_BYTES`] header then payload:
//!
//! ```text
//! u64 m | u32 L | u32 r | u8 offset width | u8 id width | 6 zero bytes
//! offsets, L * (r + 1) entries, table-major
//! ids,     L * m entries,       table-major
//! ```

use crate::error::{Error, Result};
use crate::lsh::HashCodes;

/// Fixed per-sketch header size in bytes.
pub const HEADER_BYTES: usize = 24;

/// Unsigned integers stored at 1, 2 or 4 bytes each.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Packed {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl Packed {
    fn width_for(max_value: usize) -> usize {
        if max_value <= u8::MAX as usize {
            1
        } else if max_value <= u16::MAX as usize {
            2
        } else {
            4
        }
    }

    fn from_u32(values: &[u32], width: usize) -> Self {
        match width {
            1 => Packed::U8(values.iter().map(|&v| v as u8).collect()),
            2 => Packed::U16(values.iter().map(|&v| v as u16).collect()),
            _ => Packed::U32(values.to_vec()),
        }
    }

    fn width(&self) -> usize {
        match self {
            Packed::U8(_) => 1,
            Packed::U16(_) => 2,
            Packed::U32(_) => 4,
        }
    }

    #[inline]
    fn get(&self, i: usize) -> usize {
        match self {
            Packed::U8(v) => v[i] as usize,
            Packed::U16(v) => v[i] as usize,
            Packed::U32(v) => v[i] as usize,
        }
    }

    fn slice(&self, start: usize, end: usize) -> IdSlice<'_> {
        match self {
            Packed::U8(v) => IdSlice::U8(&v[start..end]),
            Packed::U16(v) => IdSlice::U16(&v[start..end]),
            Packed::U32(v) => IdSlice::U32(&v[start..end]),
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            Packed::U8(v) => out.extend_from_slice(v),
            Packed::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Packed::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }

    fn read_le(bytes: &[u8], width: usize) -> Self {
        match width {
            1 => Packed::U8(bytes.to_vec()),
            2 => Packed::U16(
                bytes
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            _ => Packed::U32(
                bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        }
    }
}

/// Borrowed view of one bucket's vector ids.
#[derive(Debug, Clone, Copy)]
pub enum IdSlice<'a> {
    U8(&'a [u8]),
    U16(&'a [u16]),
    U32(&'a [u32]),
}

impl IdSlice<'_> {
    pub fn len(&self) -> usize {
        match self {
            IdSlice::U8(s) => s.len(),
            IdSlice::U16(s) => s.len(),
            IdSlice::U32(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            IdSlice::U8(s) => s.iter().map(|&x| x as usize).collect(),
            IdSlice::U16(s) => s.iter().map(|&x| x as usize).collect(),
            IdSlice::U32(s) => s.iter().map(|&x| x as usize).collect(),
        }
    }
}

/// Per-vector collision counts against one query vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionCounts(pub Vec<u32>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TinyTable {
    m: usize,
    num_tables: usize,
    range: usize,
    offsets: Packed,
    ids: Packed,
}

impl TinyTable {
    /// Builds from one `HashCodes` per vector.
    pub fn build(codes_per_vector: &[HashCodes], num_tables: usize, range: usize) -> Result<Self> {
        if codes_per_vector.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut flat = Vec::with_capacity(codes_per_vector.len() * num_tables);
        for codes in codes_per_vector {
            if codes.len() != num_tables {
                return Err(Error::LengthMismatch {
                    expected: num_tables,
                    got: codes.len(),
                });
            }
            flat.extend_from_slice(codes.as_slice());
        }
        Self::from_flat_codes(&flat, num_tables, range)
    }

    /// Builds from a flat `m * L` buffer, vector-major (`codes[j * L + t]`).
    ///
    /// Two-pass counting sort per table; ids within a bucket are ascending.
    pub fn from_flat_codes(codes: &[u32], num_tables: usize, range: usize) -> Result<Self> {
        if num_tables == 0 || range == 0 {
            return Err(Error::invalid("sketch needs L >= 1 and r >= 1"));
        }
        if codes.is_empty() {
            return Err(Error::EmptySet);
        }
        if !codes.len().is_multiple_of(num_tables) {
            return Err(Error::LengthMismatch {
                expected: (codes.len() / num_tables + 1) * num_tables,
                got: codes.len(),
            });
        }
        if let Some(&code) = codes.iter().find(|&&c| c as usize >= range) {
            return Err(Error::CodeOutOfRange { code, range });
        }
        let m = codes.len() / num_tables;
        if m > u32::MAX as usize {
            return Err(Error::invalid("set too large for a sketch"));
        }

        let mut offsets = vec![0u32; num_tables * (range + 1)];
        let mut ids = vec![0u32; num_tables * m];
        let mut cursor = vec![0u32; range];
        for t in 0..num_tables {
            let off = &mut offsets[t * (range + 1)..(t + 1) * (range + 1)];
            for j in 0..m {
                off[codes[j * num_tables + t] as usize + 1] += 1;
            }
            for h in 0..range {
                off[h + 1] += off[h];
            }
            cursor.copy_from_slice(&off[..range]);
            let table_ids = &mut ids[t * m..(t + 1) * m];
            for j in 0..m {
                let h = codes[j * num_tables + t] as usize;
                table_ids[cursor[h] as usize] = j as u32;
                cursor[h] += 1;
            }
        }

        Ok(Self {
            m,
            num_tables,
            range,
            offsets: Packed::from_u32(&offsets, Packed::width_for(m)),
            ids: Packed::from_u32(&ids, Packed::width_for(m - 1)),
        })
    }

    /// Set cardinality.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_tables(&self) -> usize {
        self.num_tables
    }

    /// Hash range `r`.
    pub fn range(&self) -> usize {
        self.range
    }

    pub fn bucket(&self, t: usize, h: usize) -> Result<IdSlice<'_>> {
        if t >= self.num_tables {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.num_tables,
            });
        }
        if h >= self.range {
            return Err(Error::IndexOutOfRange {
                index: h,
                len: self.range,
            });
        }
        Ok(self.bucket_unchecked(t, h))
    }

    #[inline]
    fn bucket_unchecked(&self, t: usize, h: usize) -> IdSlice<'_> {
        let base = t * (self.range + 1) + h;
        let start = self.offsets.get(base);
        let end = self.offsets.get(base + 1);
        self.ids.slice(t * self.m + start, t * self.m + end)
    }

    /// Counts, for every stored vector, the tables whose bucket it shares with
    /// `query_codes`.
    pub fn accumulate_collisions(&self, query_codes: &HashCodes) -> Result<CollisionCounts> {
        self.check_query(query_codes.as_slice())?;
        let mut counts = vec![0u32; self.m];
        self.accumulate_into(query_codes.as_slice(), &mut counts);
        Ok(CollisionCounts(counts))
    }

    fn check_query(&self, query_codes: &[u32]) -> Result<()> {
        if query_codes.len() != self.num_tables {
            return Err(Error::LengthMismatch {
                expected: self.num_tables,
                got: query_codes.len(),
            });
        }
        if let Some(&code) = query_codes.iter().find(|&&c| c as usize >= self.range) {
            return Err(Error::CodeOutOfRange {
                code,
                range: self.range,
            });
        }
        Ok(())
    }

    /// Adds collision counts into `counts[..m]`. Codes must be in range.
    pub(crate) fn accumulate_into(&self, query_codes: &[u32], counts: &mut [u32]) {
        for (t, &h) in query_codes.iter().enumerate() {
            match self.bucket_unchecked(t, h as usize) {
                IdSlice::U8(s) => s.iter().for_each(|&j| counts[j as usize] += 1),
                IdSlice::U16(s) => s.iter().for_each(|&j| counts[j as usize] += 1),
                IdSlice::U32(s) => s.iter().for_each(|&j| counts[j as usize] += 1),
            }
        }
    }

    /// Like [`accumulate_into`](Self::accumulate_into) but records each id the
    /// first time it is hit, so the caller can reset only touched entries.
    #[inline]
    pub(crate) fn accumulate_touched(&self, query_codes: &[u32], counts: &mut [u32], touched: &mut Vec<u32>) {
        #[inline(always)]
        fn bump(j: usize, counts: &mut [u32], touched: &mut Vec<u32>) {
            if counts[j] == 0 {
                touched.push(j as u32);
            }
            counts[j] += 1;
        }
        for (t, &h) in query_codes.iter().enumerate() {
            match self.bucket_unchecked(t, h as usize) {
                IdSlice::U8(s) => s.iter().for_each(|&j| bump(j as usize, counts, touched)),
                IdSlice::U16(s) => s.iter().for_each(|&j| bump(j as usize, counts, touched)),
                IdSlice::U32(s) => s.iter().for_each(|&j| bump(j as usize, counts, touched)),
            }
        }
    }

    pub fn offset_width(&self) -> usize {
        self.offsets.width()
    }

    pub fn id_width(&self) -> usize {
        self.ids.width()
    }

    /// Offsets of table `t` (`r + 1` entries).
    pub fn table_offsets(&self, t: usize) -> Vec<usize> {
        let base = t * (self.range + 1);
        (0..=self.range).map(|h| self.offsets.get(base + h)).collect()
    }

    /// Vector ids of table `t` in bucket order.
    pub fn table_ids(&self, t: usize) -> Vec<usize> {
        (0..self.m).map(|i| self.ids.get(t * self.m + i)).collect()
    }

    pub fn serialized_len(&self) -> usize {
        tiny_table_bytes(self.m, self.range, self.num_tables)
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.m as u64).to_le_bytes());
        out.extend_from_slice(&(self.num_tables as u32).to_le_bytes());
        out.extend_from_slice(&(self.range as u32).to_le_bytes());
        out.push(self.offsets.width() as u8);
        out.push(self.ids.width() as u8);
        out.extend_from_slice(&[0u8; 6]);
        self.offsets.write_le(out);
        self.ids.write_le(out);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        self.write_to(&mut out);
        out
    }

    /// Parses one sketch from the front of `bytes`, returning it and the
    /// number of bytes consumed. All structural invariants are re-checked.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::TruncatedFile);
        }
        let m = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let num_tables = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let range = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let (ow, iw) = (bytes[16] as usize, bytes[17] as usize);
        if bytes[18..24].iter().any(|&b| b != 0) {
            return Err(Error::CorruptSketch("nonzero reserved header bytes".into()));
        }
        if m == 0 || m > u32::MAX as u64 || num_tables == 0 || range == 0 {
            return Err(Error::CorruptSketch(format!(
                "bad shape m={m} L={num_tables} r={range}"
            )));
        }
        let m = m as usize;
        if ow != Packed::width_for(m) || iw != Packed::width_for(m - 1) {
            return Err(Error::CorruptSketch(format!(
                "integer widths ({ow}, {iw}) inconsistent with m={m}"
            )));
        }
        let off_bytes = num_tables
            .checked_mul(range + 1)
            .and_then(|n| n.checked_mul(ow))
            .ok_or_else(|| Error::CorruptSketch("offset table size overflow".into()))?;
        let id_bytes = num_tables * m * iw;
        let total = HEADER_BYTES + off_bytes + id_bytes;
        if bytes.len() < total {
            return Err(Error::TruncatedFile);
        }
        let offsets = Packed::read_le(&bytes[HEADER_BYTES..HEADER_BYTES + off_bytes], ow);
        let ids = Packed::read_le(&bytes[HEADER_BYTES + off_bytes..total], iw);
        let table = Self {
            m,
            num_tables,
            range,
            offsets,
            ids,
        };
        table.validate()?;
        Ok((table, total))
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.m];
        for t in 0..self.num_tables {
            let base = t * (self.range + 1);
            if self.offsets.get(base) != 0 || self.offsets.get(base + self.range) != self.m {
                return Err(Error::CorruptSketch(format!("table {t} offsets do not span 0..m")));
            }
            for h in 0..self.range {
                if self.offsets.get(base + h) > self.offsets.get(base + h + 1) {
                    return Err(Error::CorruptSketch(format!("table {t} offsets are non-monotone")));
                }
            }
            seen.iter_mut().for_each(|s| *s = false);
            for i in 0..self.m {
                let j = self.ids.get(t * self.m + i);
                if j >= self.m || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::CorruptSketch(format!("table {t} ids are not a permutation")));
                }
            }
        }
        Ok(())
    }
}

/// Serialized size of a sketch: the fixed header plus `L * (r + 1)` offsets
/// and `L * m` ids at their packed widths. In the one-byte regime
/// (`m <= 255`) this is `24 + L * (m + r + 1)`.
pub fn tiny_table_bytes(m: usize, range: usize, num_tables: usize) -> usize {
    let ow = Packed::width_for(m);
    let iw = Packed::width_for(m.saturating_sub(1));
    HEADER_BYTES + num_tables * ((range + 1) * ow + m * iw)
}
