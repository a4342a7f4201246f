use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::debug;
use walkdir::WalkDir;

use super::{parse_dict, CaseError, FoamNode};
use crate::agent::{estimate_tokens, render_prompt_template, PromptTemplate};

const VCS_DIRS: &[&str] = &[".git", ".svn", ".hg"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub parsed: Option<FoamNode>,
    pub raw: String,
    pub skipped: bool,
    pub skip_reason: Option<String>,
}

/// Snapshot of a case directory keyed by `/`-separated relative path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTree {
    pub root: PathBuf,
    pub files: BTreeMap<String, FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSnapshot {
    pub text: String,
    pub file_count: usize,
    pub token_estimate: usize,
}

fn rel_string(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn skip_reason(rel: &str) -> Option<&'static str> {
    let mut parts = rel.split('/');
    let first = parts.next().unwrap_or_default();
    let name = rel.rsplit('/').next().unwrap_or_default();
    if rel.starts_with("constant/polyMesh/") {
        Some("mesh data")
    } else if first.starts_with("processor") && rel.contains('/') {
        Some("decomposed data")
    } else if name.starts_with("log.") || name.ends_with(".log") {
        Some("log file")
    } else {
        None
    }
}

fn is_time_dir(name: &str) -> bool {
    name.parse::<f64>().is_ok_and(f64::is_finite)
}

fn wants_parse(rel: &str, raw: &str) -> bool {
    let first = rel.split('/').next().unwrap_or_default();
    let in_case_dir = rel.contains('/') && (first == "system" || first == "constant" || is_time_dir(first));
    in_case_dir || raw.contains("FoamFile")
}

fn skipped(reason: &str) -> FileRecord {
    FileRecord {
        parsed: None,
        raw: String::new(),
        skipped: true,
        skip_reason: Some(reason.to_string()),
    }
}

/// Read every file under `root`. Machine-generated and binary files are
/// recorded as skipped; VCS metadata is not visited at all.
pub fn load_case(root: &Path) -> Result<CaseTree, CaseError> {
    if !root.is_dir() {
        return Err(CaseError::RootMissing(root.to_path_buf()));
    }
    let mut files = BTreeMap::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| !(e.depth() > 0 && e.file_type().is_dir() && VCS_DIRS.iter().any(|d| e.file_name() == *d)));
    for entry in walker {
        let entry = entry.map_err(|e| CaseError::Io(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = rel_string(entry.path().strip_prefix(root).unwrap_or(entry.path()));
        let record = if let Some(reason) = skip_reason(&rel) {
            skipped(reason)
        } else {
            let bytes = std::fs::read(entry.path()).map_err(|e| CaseError::Io(format!("{rel}: {e}")))?;
            if bytes.contains(&0) {
                skipped("binary")
            } else {
                let raw = String::from_utf8_lossy(&bytes).replace("\r\n", "\n");
                let parsed = if wants_parse(&rel, &raw) {
                    parse_dict(&raw)
                        .inspect_err(|e| debug!(%rel, error = %e, "kept as raw text"))
                        .ok()
                } else {
                    None
                };
                FileRecord {
                    parsed,
                    raw,
                    skipped: false,
                    skip_reason: None,
                }
            }
        };
        files.insert(rel, record);
    }
    Ok(CaseTree {
        root: root.to_path_buf(),
        files,
    })
}

fn skip_blank(text: &str) -> &str {
    text.trim_start()
}

fn strip_leading_comments(mut text: &str) -> &str {
    loop {
        text = skip_blank(text);
        if text.starts_with("/*") {
            match text.find("*/") {
                Some(end) => text = &text[end + 2..],
                None => return text,
            }
        } else if text.starts_with("//") {
            text = &text[text.find('\n').unwrap_or(text.len())..];
        } else {
            return text;
        }
    }
}

fn strip_foamfile_block(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("FoamFile") else {
        return text;
    };
    let rest = rest.trim_start();
    if !rest.starts_with('{') {
        return text;
    }
    let mut depth = 0usize;
    for (i, c) in rest.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return &rest[i + 1..];
                }
            }
            _ => {}
        }
    }
    text
}

fn is_rule_line(line: &str) -> bool {
    let t = line.trim();
    t.starts_with("//") && t.len() > 4 && t.trim_matches(|c: char| c == '/' || c == '*' || c.is_whitespace()).is_empty()
}

/// Drop the banner, the FoamFile block and the closing rule line.
pub fn strip_boilerplate(raw: &str) -> String {
    let text = raw.replace("\r\n", "\n");
    let body = strip_leading_comments(&text);
    let stripped = strip_foamfile_block(body);
    let body = if stripped.len() != body.len() {
        strip_leading_comments(stripped)
    } else {
        body
    };
    let mut lines: Vec<&str> = body.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty() || is_rule_line(l)) {
        lines.pop();
    }
    lines.join("\n")
}

pub fn file_header(rel_path: &str) -> String {
    format!("==== file: {rel_path} ====\n")
}

/// Concatenate every non-skipped file in sorted order.
pub fn flatten_tree(tree: &CaseTree) -> CaseSnapshot {
    let mut text = String::new();
    let mut file_count = 0;
    for (rel, record) in &tree.files {
        if record.skipped {
            continue;
        }
        text.push_str(&file_header(rel));
        text.push_str(&strip_boilerplate(&record.raw));
        text.push('\n');
        file_count += 1;
    }
    let token_estimate = estimate_tokens(&text);
    CaseSnapshot {
        text,
        file_count,
        token_estimate,
    }
}

pub fn flatten_case(root: &Path) -> Result<CaseSnapshot, CaseError> {
    Ok(flatten_tree(&load_case(root)?))
}

/// The case-configuration task prompt with all slots bound.
pub fn build_config_prompt(case_path: &str, user_request: &str, snapshot: &CaseSnapshot) -> String {
    let bindings = HashMap::from([
        ("case_path", case_path),
        ("user_request", user_request),
        ("case_contents", snapshot.text.as_str()),
    ]);
    render_prompt_template(PromptTemplate::CaseConfig, &bindings).expect("all slots bound")
}
