use std::sync::Arc;
use std::time::Instant;

use serde_json::Value;

use super::{truncate_output, OutputLimits, Tool, ToolContext, ToolError, ToolResult, ToolSpec, RETRIEVE_TOOL};
use crate::index::{search, SearchHit, VectorIndex, DEFAULT_RETRIEVAL_K};
use crate::llm::Embedder;

/// Location header followed by every hit's full document.
pub fn format_hits(hits: &[SearchHit<'_>]) -> String {
    let paths: Vec<&str> = hits.iter().map(|h| h.doc.rel_path.as_str()).collect();
    let mut out = format!("**Possible File Locations:**\n\n[{}]\n", paths.join(", "));
    for hit in hits {
        out.push('\n');
        out.push_str(&hit.doc.full_text);
        if !hit.doc.full_text.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

pub fn retrieve(query: &str, k: usize, index: Option<&VectorIndex>, embedder: &dyn Embedder) -> Result<ToolResult, ToolError> {
    let started = Instant::now();
    let index = index.filter(|i| !i.is_empty()).ok_or(ToolError::IndexNotLoaded)?;
    if query.trim().is_empty() {
        return Err(ToolError::InvalidInput("retrieve expects a non-empty query".into()));
    }
    let vector = embedder
        .embed(&[query.to_string()])?
        .pop()
        .ok_or_else(|| ToolError::InvalidInput("embedder returned no vector".into()))?;
    let hits = search(index, &vector, k.max(1))?;
    let limits = OutputLimits::RETRIEVAL;
    let (output, truncated) = truncate_output(&format_hits(&hits), limits.head, limits.tail);
    Ok(ToolResult {
        ok: true,
        output,
        exit_code: None,
        duration: started.elapsed(),
        truncated,
    })
}

pub struct RetrieveTool {
    index: Option<Arc<VectorIndex>>,
    embedder: Arc<dyn Embedder>,
    pub k: usize,
}

impl RetrieveTool {
    pub fn new(index: Option<Arc<VectorIndex>>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            index,
            embedder,
            k: DEFAULT_RETRIEVAL_K,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k.max(1);
        self
    }
}

impl Tool for RetrieveTool {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: RETRIEVE_TOOL.to_string(),
            description: "Search the solver source code by meaning and return the closest files in full.".to_string(),
            input_schema_hint: "a natural-language query string".to_string(),
        }
    }

    fn invoke(&self, input: &Value, _ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError> {
        let query = super::input_field(input, &["query", "q"])
            .ok_or_else(|| ToolError::InvalidInput("retrieve expects a query string".into()))?;
        let k = input
            .get("k")
            .and_then(Value::as_u64)
            .map(|k| k as usize)
            .unwrap_or(self.k);
        retrieve(&query, k, self.index.as_deref(), self.embedder.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, SourceDoc};
    use crate::llm::HashEmbedder;

    fn corpus() -> VectorIndex {
        let docs = vec![
            SourceDoc::from_parts(0, "pyrolysis/reactingOneDim.H", Some("class reactingOneDim;"), Some("void reactingOneDim::solveEnergy() {}")).unwrap(),
            SourceDoc::from_parts(1, "spray/drag.H", Some("class nonSphereDrag;"), Some("scalar nonSphereDrag::CdRe() {}")).unwrap(),
            SourceDoc::from_parts(2, "film/film.C", None, Some("void filmModel::evolve() {}")).unwrap(),
        ];
        build_index(docs, &HashEmbedder::default(), 8192).unwrap()
    }

    #[test]
    fn distinctive_term_ranks_first() {
        let index = corpus();
        let r = retrieve("where is nonSphereDrag", 2, Some(&index), &HashEmbedder::default()).unwrap();
        assert!(r.output.starts_with("**Possible File Locations:**\n\n[spray/drag.H,"));
        assert!(r.output.contains("scalar nonSphereDrag::CdRe() {}"));
    }

    #[test]
    fn k_beyond_corpus_returns_all() {
        let index = corpus();
        let r = retrieve("evolve", 10, Some(&index), &HashEmbedder::default()).unwrap();
        for path in ["pyrolysis/reactingOneDim.H", "spray/drag.H", "film/film.C"] {
            assert!(r.output.contains(&format!("// File: {path}")));
        }
    }

    #[test]
    fn empty_index_not_loaded() {
        let mut index = corpus();
        index.docs.clear();
        assert!(matches!(retrieve("x", 2, Some(&index), &HashEmbedder::default()), Err(ToolError::IndexNotLoaded)));
        assert!(matches!(retrieve("x", 2, None, &HashEmbedder::default()), Err(ToolError::IndexNotLoaded)));
    }
}
