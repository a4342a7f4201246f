use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusEntry, IndexError};
use crate::agent::estimate_tokens;

const BOILERPLATE_MARKERS: &[&str] = &["License", "GNU General Public License", "\\*---"];

/// A retrievable document: the path line, then the stripped header, then
/// the stripped source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDoc {
    pub doc_id: u32,
    pub rel_path: String,
    pub full_text: String,
    pub paired: bool,
}

impl SourceDoc {
    /// Assemble a document from in-memory file contents.
    pub fn from_parts(
        doc_id: u32,
        rel_path: &str,
        header: Option<&str>,
        source: Option<&str>,
    ) -> Result<Self, IndexError> {
        if header.is_none() && source.is_none() {
            return Err(IndexError::EmptyPair);
        }
        let mut full_text = format!("// File: {rel_path}\n");
        let parts: Vec<String> = [header, source].into_iter().flatten().map(strip_boilerplate).collect();
        full_text.push_str(&parts.join("\n"));
        Ok(Self {
            doc_id,
            rel_path: rel_path.to_string(),
            full_text,
            paired: header.is_some() && source.is_some(),
        })
    }

    pub fn path_line(&self) -> &str {
        self.full_text.lines().next().unwrap_or_default()
    }
}

/// Segments of the leading comment region of a C++ file.
enum Lead {
    Space(usize, usize),
    Block(usize, usize),
    Line(usize, usize),
}

fn leading_segments(text: &str) -> (Vec<Lead>, usize) {
    let bytes = text.as_bytes();
    let mut segments = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        if bytes[i].is_ascii_whitespace() {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            segments.push(Lead::Space(start, i));
        } else if text[i..].starts_with("/*") {
            i = text[i + 2..].find("*/").map(|e| i + 2 + e + 2).unwrap_or(bytes.len());
            segments.push(Lead::Block(start, i));
        } else if text[i..].starts_with("//") {
            i = text[i..].find('\n').map(|e| i + e + 1).unwrap_or(bytes.len());
            segments.push(Lead::Line(start, i));
        } else {
            break;
        }
    }
    (segments, i)
}

/// Drop leading block comments that look like license banners. Everything
/// from the first code token on, and every other comment, is kept verbatim.
pub fn strip_boilerplate(text: &str) -> String {
    let (segments, code_start) = leading_segments(text);
    let mut out = String::with_capacity(text.len());
    let mut dropped_previous = false;
    for seg in &segments {
        match *seg {
            Lead::Block(s, e) => {
                let body = &text[s..e];
                if BOILERPLATE_MARKERS.iter().any(|m| body.contains(m)) {
                    dropped_previous = true;
                } else {
                    out.push_str(body);
                    dropped_previous = false;
                }
            }
            Lead::Space(s, e) => {
                if !dropped_previous {
                    out.push_str(&text[s..e]);
                }
            }
            Lead::Line(s, e) => {
                out.push_str(&text[s..e]);
                dropped_previous = false;
            }
        }
    }
    out.push_str(&text[code_start..]);
    out
}

fn read_lossy(path: &Path) -> Result<String, IndexError> {
    let bytes = fs::read(path)?;
    Ok(String::from_utf8_lossy(&bytes).replace("\r\n", "\n"))
}

/// Read and assemble one corpus entry below `root`.
pub fn prepare_document(root: &Path, entry: &CorpusEntry, doc_id: u32) -> Result<SourceDoc, IndexError> {
    let header = entry.header.as_ref().map(|p| read_lossy(&root.join(p))).transpose()?;
    let source = entry.source.as_ref().map(|p| read_lossy(&root.join(p))).transpose()?;
    SourceDoc::from_parts(doc_id, entry.rel_path(), header.as_deref(), source.as_deref())
}

pub fn prepare_documents(root: &Path, entries: &[CorpusEntry]) -> Result<Vec<SourceDoc>, IndexError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| prepare_document(root, e, i as u32))
        .collect()
}

/// Longest prefix of `text` within `max_tokens`, cut after a newline when
/// one exists in range.
pub fn truncate_for_embedding(text: &str, max_tokens: usize) -> &str {
    let max_tokens = max_tokens.max(1);
    if estimate_tokens(text) <= max_tokens {
        return text;
    }
    let mut cut = (max_tokens * 4).min(text.len());
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    match text[..cut].rfind('\n') {
        Some(nl) => &text[..nl + 1],
        None => &text[..cut],
    }
}
