//! Entity resolution for document collections whose records reference each
//! other by primary key.
//!
//! Documents that describe the same real-world entity are discovered two
//! ways: textual similarity (MinHash LSH over attribute word sets) and
//! reference traversal (following explicit and implicit links between
//! documents). Candidate buckets are resolved with an iterative match-merge
//! loop, partial results are consolidated through connected components, and
//! the whole pipeline can run incrementally against persisted state so that
//! new documents only touch the entities they actually affect.

pub mod components;
pub mod corpus;
pub mod datagen;
pub mod document;
pub mod error;
pub mod eval;
pub mod imm;
pub mod index;
pub mod lsh;
pub mod matching;
pub mod pair_cache;
pub mod pipeline;
pub mod schema;
pub mod similarity;
pub mod state;
pub mod traversal;

pub use document::{Document, DocumentId, Entity, EntityId};
pub use error::{ErldError, Result};
pub use pipeline::{resolve_batch, resolve_incremental, ResolveConfig, RunStats};
pub use schema::SchemaConfig;
pub use state::ResolutionState;
