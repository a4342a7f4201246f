use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{truncate_for_embedding, IndexError, SourceDoc, FORMAT_VERSION};
use crate::llm::Embedder;

pub const DEFAULT_EMBED_MAX_TOKENS: usize = 8192;
pub const DEFAULT_RETRIEVAL_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedDoc {
    pub doc: SourceDoc,
    /// Unit L2 norm.
    pub vector: Vec<f32>,
    /// Bytes of `doc.full_text` that were embedded.
    pub embedded_chars: usize,
}

impl EmbeddedDoc {
    pub fn was_truncated(&self) -> bool {
        self.embedded_chars < self.doc.full_text.len()
    }
}

/// Exact-search vector store. Immutable once built or loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub dimension: usize,
    pub docs: Vec<EmbeddedDoc>,
    pub embed_model_tag: String,
    pub format_version: u32,
}

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn truncated_count(&self) -> usize {
        self.docs.iter().filter(|d| d.was_truncated()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<'a> {
    pub doc: &'a SourceDoc,
    pub score: f64,
}

fn normalize(vector: &[f32]) -> Result<Vec<f32>, IndexError> {
    let norm = vector.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(IndexError::ZeroVector);
    }
    Ok(vector.iter().map(|x| (f64::from(*x) / norm) as f32).collect())
}

/// Embed each document from its truncated text. Document ids are
/// reassigned to their position so they are dense from zero.
pub fn build_index(docs: Vec<SourceDoc>, embedder: &dyn Embedder, max_tokens: usize) -> Result<VectorIndex, IndexError> {
    if docs.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let inputs: Vec<String> = docs
        .iter()
        .map(|d| truncate_for_embedding(&d.full_text, max_tokens).to_string())
        .collect();
    let vectors = embedder.embed(&inputs)?;
    if vectors.len() != docs.len() {
        return Err(IndexError::CorruptIndex(format!(
            "embedder returned {} vectors for {} documents",
            vectors.len(),
            docs.len()
        )));
    }
    let dimension = vectors[0].len();
    let mut embedded = Vec::with_capacity(docs.len());
    for (i, ((mut doc, vector), input)) in docs.into_iter().zip(vectors).zip(inputs).enumerate() {
        if vector.len() != dimension {
            return Err(IndexError::DimensionMismatch {
                expected: dimension,
                found: vector.len(),
            });
        }
        doc.doc_id = i as u32;
        embedded.push(EmbeddedDoc {
            vector: normalize(&vector)?,
            embedded_chars: input.len(),
            doc,
        });
    }
    Ok(VectorIndex {
        dimension,
        docs: embedded,
        embed_model_tag: embedder.model_tag(),
        format_version: FORMAT_VERSION,
    })
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, IndexError> {
    if u.len() != v.len() {
        return Err(IndexError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (f64::from(*a), f64::from(*b));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(IndexError::ZeroVector);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// Exhaustive cosine ranking; ties go to the lower document id.
pub fn search<'a>(index: &'a VectorIndex, query: &[f32], k: usize) -> Result<Vec<SearchHit<'a>>, IndexError> {
    if query.len() != index.dimension {
        return Err(IndexError::DimensionMismatch {
            expected: index.dimension,
            found: query.len(),
        });
    }
    let mut hits = index
        .docs
        .iter()
        .map(|d| cosine(query, &d.vector).map(|score| SearchHit { doc: &d.doc, score }))
        .collect::<Result<Vec<_>, _>>()?;
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.doc.doc_id.cmp(&b.doc.doc_id))
    });
    hits.truncate(k.max(1));
    Ok(hits)
}
