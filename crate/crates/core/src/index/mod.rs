//! Source-code retrieval index: scan a C++ tree, pair `.H` headers with
//! their `.C` sources, strip license banners, embed, and search by cosine
//! similarity.

mod persist;
mod prepare;
mod scan;
mod store;

use std::path::PathBuf;

use crate::llm::LlmError;

pub use persist::{load_index, save_index, FORMAT_VERSION, INDEX_EXTENSION, MAGIC};
pub use prepare::{prepare_document, prepare_documents, strip_boilerplate, truncate_for_embedding, SourceDoc};
pub use scan::{scan_corpus, CorpusEntry, DEFAULT_EXCLUDES, DEFAULT_INCLUDES};
pub use store::{build_index, cosine, search, EmbeddedDoc, SearchHit, VectorIndex, DEFAULT_EMBED_MAX_TOKENS, DEFAULT_RETRIEVAL_K};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("root not found: {0}")]
    RootMissing(PathBuf),
    #[error("invalid glob pattern {0:?}")]
    BadGlob(String),
    #[error("corpus entry has neither header nor source")]
    EmptyPair,
    #[error("no documents to index")]
    EmptyCorpus,
    #[error("embedding failed: {0}")]
    Embedder(#[from] LlmError),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("index format version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
