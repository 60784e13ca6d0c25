//! On-disk formats. Everything is little-endian and starts with a 4-byte
//! magic plus a `u32` format version.
//!
//! Vector-set file (`DSRT`):
//!
//! ```text
//! "DSRT" | u32 version | u64 N | u32 d
//! N × { u64 doc_id | u32 m | m·d f32 row-major }
//! ```
//!
//! Index file (`DSRI`):
//!
//! ```text
//! "DSRI" | u32 version
//! config:  u32 d | u32 C | u32 L | u64 seed | u8 inner
//!          u8 filter enabled | u32 centroids (0 = auto) | u32 iters | u32 probe | u32 k_filter
//! family:  u32 d | u32 C | u32 L | u64 seed          (hyperplanes regenerated)
//! lookup:  u32 C | u32 L
//! u64 N, then N × { u64 doc_id | sketch bytes }
//! u8 has prefilter, then if 1:
//!          u32 k | u32 d | u64 seed | k·d f32 centroids
//!          k × { varint len | len × varint delta-encoded doc index }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::index::{DessertIndex, IndexConfig, PrefilterConfig};
use crate::prefilter::{CentroidIndex, Centroids, Prefilter};
use crate::ranking::RankedResults;
use crate::scoring::{InnerAggregation, Phi};
use crate::sketch::TinyTable;
use crate::vectors::{Document, VectorSet};

pub const VECTOR_SET_MAGIC: [u8; 4] = *b"DSRT";
pub const INDEX_MAGIC: [u8; 4] = *b"DSRI";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        if end > self.buf.len() {
            return Err(Error::TruncatedFile);
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(Error::TruncatedFile)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.u8()?;
            value |= ((byte & 0x7f) as u64) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::Corrupt("varint longer than 10 bytes".into()))
    }

    fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.array()?;
        if found != magic {
            return Err(Error::BadMagic { expected: magic, found });
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} does not fit in u32")))
}

pub fn encode_vector_sets(docs: &[Document]) -> Result<Vec<u8>> {
    let dim = docs.first().map_or(0, |d| d.vectors.dim());
    let payload: usize = docs.iter().map(|d| 12 + d.vectors.as_slice().len() * 4).sum();
    let mut out = Vec::with_capacity(20 + payload);
    out.extend_from_slice(&VECTOR_SET_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u64(&mut out, docs.len() as u64);
    put_u32(&mut out, to_u32(dim, "dimension")?);
    for doc in docs {
        if doc.vectors.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: doc.vectors.dim(),
            });
        }
        if doc.vectors.is_empty() {
            return Err(Error::EmptySet);
        }
        put_u64(&mut out, doc.id);
        put_u32(&mut out, to_u32(doc.vectors.len(), "set size")?);
        put_f32s(&mut out, doc.vectors.as_slice());
    }
    Ok(out)
}

pub fn decode_vector_sets(bytes: &[u8]) -> Result<Vec<Document>> {
    let mut r = Reader::new(bytes);
    r.header(VECTOR_SET_MAGIC)?;
    let n = r.u64()?;
    let dim = r.u32()? as usize;
    if n > 0 && dim == 0 {
        return Err(Error::Corrupt("zero dimension".into()));
    }
    // every set needs at least 12 bytes, which bounds a sane preallocation
    let mut docs = Vec::with_capacity((n as usize).min(r.rest().len() / 12));
    for _ in 0..n {
        let id = r.u64()?;
        let m = r.u32()? as usize;
        if m == 0 {
            return Err(Error::Corrupt(format!("set {id} is empty")));
        }
        let data = r.f32s(m.checked_mul(dim).ok_or(Error::TruncatedFile)?)?;
        docs.push(Document::new(id, VectorSet::new(dim, data)?));
    }
    r.finish()?;
    Ok(docs)
}

pub fn write_vector_sets(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let bytes = encode_vector_sets(docs)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_vector_sets(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    decode_vector_sets(&fs::read(path)?)
}

fn inner_code(inner: InnerAggregation) -> u8 {
    match inner {
        InnerAggregation::Max => 0,
        InnerAggregation::AvgPhi(Phi::Identity) => 1,
        InnerAggregation::AvgPhi(Phi::ExpMinusOne) => 2,
        InnerAggregation::AvgPhi(Phi::DebiasedSigmoid) => 3,
    }
}

fn inner_from_code(code: u8) -> Result<InnerAggregation> {
    Ok(match code {
        0 => InnerAggregation::Max,
        1 => InnerAggregation::AvgPhi(Phi::Identity),
        2 => InnerAggregation::AvgPhi(Phi::ExpMinusOne),
        3 => InnerAggregation::AvgPhi(Phi::DebiasedSigmoid),
        other => return Err(Error::Corrupt(format!("unknown inner aggregation code {other}"))),
    })
}

pub fn encode_index(index: &DessertIndex) -> Result<Vec<u8>> {
    let cfg = index.config();
    let mut out = Vec::with_capacity(64 + index.sketch_bytes() + 8 * index.len());
    out.extend_from_slice(&INDEX_MAGIC);
    put_u32(&mut out, FORMAT_VERSION);

    put_u32(&mut out, to_u32(cfg.dim, "dimension")?);
    put_u32(&mut out, cfg.hashes_per_table as u32);
    put_u32(&mut out, to_u32(cfg.num_tables, "table count")?);
    put_u64(&mut out, cfg.seed);
    out.push(inner_code(cfg.inner));
    out.push(cfg.prefilter.enabled as u8);
    put_u32(
        &mut out,
        to_u32(cfg.prefilter.centroids.unwrap_or(0), "centroid count")?,
    );
    put_u32(&mut out, to_u32(cfg.prefilter.iters, "iterations")?);
    put_u32(&mut out, to_u32(cfg.prefilter.probe, "probe")?);
    put_u32(&mut out, to_u32(cfg.prefilter.k_filter, "k_filter")?);

    let family = index.family();
    put_u32(&mut out, family.dim() as u32);
    put_u32(&mut out, family.hashes_per_table() as u32);
    put_u32(&mut out, family.num_tables() as u32);
    put_u64(&mut out, family.seed());

    put_u32(&mut out, index.lookup().hashes_per_table() as u32);
    put_u32(&mut out, index.lookup().num_tables() as u32);

    put_u64(&mut out, index.len() as u64);
    for (id, sketch) in index.doc_ids().iter().zip(index.sketches()) {
        put_u64(&mut out, *id);
        sketch.write_to(&mut out);
    }

    match index.prefilter() {
        None => out.push(0),
        Some(f) => {
            out.push(1);
            put_u32(&mut out, to_u32(f.centroids.k(), "centroid count")?);
            put_u32(&mut out, f.centroids.dim() as u32);
            put_u64(&mut out, f.centroids.seed());
            put_f32s(&mut out, f.centroids.as_slice());
            for posting in f.index.postings() {
                put_varint(&mut out, posting.len() as u64);
                let mut prev = 0u32;
                for &d in posting {
                    put_varint(&mut out, (d - prev) as u64);
                    prev = d;
                }
            }
        }
    }
    Ok(out)
}

pub fn decode_index(bytes: &[u8]) -> Result<DessertIndex> {
    let mut r = Reader::new(bytes);
    r.header(INDEX_MAGIC)?;

    let dim = r.u32()? as usize;
    let hashes_per_table = r.u32()? as usize;
    let num_tables = r.u32()? as usize;
    let seed = r.u64()?;
    let inner = inner_from_code(r.u8()?)?;
    let enabled = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Corrupt(format!("bad prefilter flag {other}"))),
    };
    let centroids = match r.u32()? {
        0 => None,
        k => Some(k as usize),
    };
    let prefilter = PrefilterConfig {
        enabled,
        centroids,
        iters: r.u32()? as usize,
        probe: r.u32()? as usize,
        k_filter: r.u32()? as usize,
    };
    let config = IndexConfig {
        dim,
        hashes_per_table,
        num_tables,
        seed,
        inner,
        prefilter,
    };
    if !(1..=crate::lsh::MAX_HASHES_PER_TABLE).contains(&hashes_per_table) || dim == 0 || num_tables == 0 {
        return Err(Error::Corrupt(format!(
            "bad index shape d={dim} C={hashes_per_table} L={num_tables}"
        )));
    }

    let family = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u64()?);
    if family != (dim, hashes_per_table, num_tables, seed) {
        return Err(Error::Corrupt("hash family block disagrees with config".into()));
    }
    let lookup = (r.u32()? as usize, r.u32()? as usize);
    if lookup != (hashes_per_table, num_tables) {
        return Err(Error::Corrupt("lookup block disagrees with config".into()));
    }

    let n = r.u64()?;
    let mut doc_ids = Vec::with_capacity((n as usize).min(r.rest().len() / 8));
    let mut sketches = Vec::with_capacity(doc_ids.capacity());
    for _ in 0..n {
        doc_ids.push(r.u64()?);
        let (sketch, used) = TinyTable::read_from(r.rest())?;
        r.take(used)?;
        sketches.push(sketch);
    }

    let filter = match r.u8()? {
        0 => None,
        1 => {
            let k = r.u32()? as usize;
            let cdim = r.u32()? as usize;
            let cseed = r.u64()?;
            if k == 0 || cdim != dim {
                return Err(Error::Corrupt(format!("bad centroid block k={k} d={cdim}")));
            }
            let vectors = r.f32s(k.checked_mul(cdim).ok_or(Error::TruncatedFile)?)?;
            let mut postings = Vec::with_capacity(k);
            for _ in 0..k {
                let len = r.varint()? as usize;
                if len > sketches.len() {
                    return Err(Error::Corrupt("posting longer than the collection".into()));
                }
                let mut posting = Vec::with_capacity(len);
                let mut acc = 0u64;
                for i in 0..len {
                    let delta = r.varint()?;
                    if i > 0 && delta == 0 {
                        return Err(Error::Corrupt("duplicate posting entry".into()));
                    }
                    acc = acc
                        .checked_add(delta)
                        .filter(|&v| v <= u32::MAX as u64)
                        .ok_or_else(|| Error::Corrupt("posting overflow".into()))?;
                    posting.push(acc as u32);
                }
                postings.push(posting);
            }
            Some(Prefilter {
                centroids: Centroids::from_raw(k, cdim, cseed, vectors),
                index: CentroidIndex::from_postings(sketches.len(), postings)?,
            })
        }
        other => return Err(Error::Corrupt(format!("bad prefilter marker {other}"))),
    };
    r.finish()?;
    DessertIndex::from_parts(config, sketches, doc_ids, filter)
}

pub fn save_index(path: impl AsRef<Path>, index: &DessertIndex) -> Result<()> {
    fs::write(path, encode_index(index)?)?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<DessertIndex> {
    decode_index(&fs::read(path)?)
}

pub type Qrels = BTreeMap<u64, BTreeSet<u64>>;

/// Parses `query_id<TAB>doc_id` lines; blank lines are skipped.
pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let mut fields = line.split('\t');
        let (Some(q), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected 2 tab-separated fields, got {line:?}")));
        };
        let q: u64 = q
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad query id {q:?}: {e}")))?;
        let d: u64 = d
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad doc id {d:?}: {e}")))?;
        qrels.entry(q).or_default().insert(d);
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(&fs::read_to_string(path)?)
}

pub fn write_qrels(path: impl AsRef<Path>, qrels: &Qrels) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (q, docs) in qrels {
        for d in docs {
            writeln!(w, "{q}\t{d}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const RESULTS_CSV_HEADER: &str = "query_id,rank,doc_id,score";

/// Writes ranked results as CSV rows `query_id,rank,doc_id,score` (rank is 1-based).
pub fn write_results_csv<W: Write>(mut w: W, results: &[(u64, RankedResults)]) -> Result<()> {
    writeln!(w, "{RESULTS_CSV_HEADER}")?;
    for (qid, ranked) in results {
        for (rank, e) in ranked.entries.iter().enumerate() {
            writeln!(w, "{qid},{},{},{:.9}", rank + 1, e.doc_id, e.score)?;
        }
    }
    w.flush()?;
    Ok(())
}
