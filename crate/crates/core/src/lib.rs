//! Search over collections of vector sets.
//!
//! Each indexed set is summarized by a [`TinyTable`](sketch::TinyTable):
//! `L` signed-random-projection hash tables over its vectors, packed into
//! offset and id arrays. A query set is hashed once; for every candidate set
//! the number of tables in which each stored vector collides with each query
//! vector is turned into a similarity estimate, aggregated per query vector
//! (max by default) and averaged into a set relevance score. An optional
//! k-means centroid inverted index shortlists candidates first.
//!
//! ```
//! use dessert::{synth, DessertIndex, IndexConfig, PrefilterConfig, SearchParams};
//!
//! let docs = synth::random_documents(50, 8, 16, 1);
//! let config = IndexConfig::new(16)
//!     .with_tables(4, 64)
//!     .with_prefilter(PrefilterConfig::disabled());
//! let index = DessertIndex::build(&docs, config).unwrap();
//! let hits = index.query(&docs[7].vectors, &SearchParams::top_k(3)).unwrap();
//! assert_eq!(hits.top(), Some(7));
//! ```

pub mod bench;
pub mod error;
pub mod eval;
pub mod index;
pub mod lsh;
pub mod oracle;
pub mod prefilter;
pub mod ranking;
pub mod scoring;
pub mod sketch;
pub mod storage;
pub mod synth;
pub mod theory;
pub mod vectors;

pub use error::{Error, Result};
pub use index::{DessertIndex, IndexConfig, PrefilterConfig, Profile, SearchParams, PROFILES};
pub use lsh::{HashCodes, SimLookup, SrpFamily};
pub use ranking::{RankedResults, ScoredDoc};
pub use scoring::{InnerAggregation, OuterWeights, Phi, Scorer};
pub use sketch::TinyTable;
pub use vectors::{Document, VectorSet};
