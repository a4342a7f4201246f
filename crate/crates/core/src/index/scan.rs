use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use walkdir::WalkDir;

use super::IndexError;

pub const DEFAULT_INCLUDES: &[&str] = &["**/*.H", "**/*.C"];
pub const DEFAULT_EXCLUDES: &[&str] = &["**/lnInclude/**", "**/Make/**"];

/// One document-to-be: a header/source pair, or a lone file. Paths are
/// relative to the scanned root and use `/` separators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub header: Option<String>,
    pub source: Option<String>,
}

impl CorpusEntry {
    /// The header's path for pairs, otherwise whichever file is present.
    pub fn rel_path(&self) -> &str {
        self.header
            .as_deref()
            .or(self.source.as_deref())
            .unwrap_or_default()
    }

    pub fn is_pair(&self) -> bool {
        self.header.is_some() && self.source.is_some()
    }
}

/// Translate a `/`-separated glob (`**`, `*`, `?`) into an anchored regex.
pub(crate) fn glob_to_regex(pattern: &str) -> Result<Regex, IndexError> {
    let mut re = String::from("^");
    let chars: Vec<char> = pattern.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '*' if chars.get(i + 1) == Some(&'*') => {
                let at_start = i == 0 || chars[i - 1] == '/';
                let slash_after = chars.get(i + 2) == Some(&'/');
                if at_start && slash_after {
                    re.push_str("(?:.*/)?");
                    i += 3;
                    continue;
                }
                if at_start && i + 2 == chars.len() && i > 0 {
                    // "a/**": drop the slash already emitted and match any suffix
                    re.truncate(re.len() - 1);
                    re.push_str("(?:/.*)?");
                } else {
                    re.push_str(".*");
                }
                i += 2;
                continue;
            }
            '*' => re.push_str("[^/]*"),
            '?' => re.push_str("[^/]"),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
        i += 1;
    }
    re.push('$');
    Regex::new(&re).map_err(|_| IndexError::BadGlob(pattern.to_string()))
}

fn compile(patterns: &[&str]) -> Result<Vec<Regex>, IndexError> {
    patterns.iter().map(|p| glob_to_regex(p)).collect()
}

/// Walk `root` and group matching files into header/source pairs. A `.H`
/// pairs only with the `.C` of the same stem in the same directory.
pub fn scan_corpus(root: &Path, includes: &[&str], excludes: &[&str]) -> Result<Vec<CorpusEntry>, IndexError> {
    if !root.is_dir() {
        return Err(IndexError::RootMissing(root.to_path_buf()));
    }
    let includes = compile(includes)?;
    let excludes = compile(excludes)?;

    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| IndexError::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if includes.iter().any(|r| r.is_match(&rel)) && !excludes.iter().any(|r| r.is_match(&rel)) {
            files.push(rel);
        }
    }

    // (dir/stem) -> entry for .H/.C files; everything else stands alone
    let mut grouped: BTreeMap<String, CorpusEntry> = BTreeMap::new();
    let mut singles = Vec::new();
    for rel in files {
        let (stem, ext) = match rel.rsplit_once('.') {
            Some((stem, ext)) if !stem.ends_with('/') && !stem.is_empty() => (stem.to_string(), ext),
            _ => (rel.clone(), ""),
        };
        match ext {
            "H" => {
                grouped
                    .entry(stem)
                    .or_insert(CorpusEntry { header: None, source: None })
                    .header = Some(rel)
            }
            "C" => {
                grouped
                    .entry(stem)
                    .or_insert(CorpusEntry { header: None, source: None })
                    .source = Some(rel)
            }
            _ => singles.push(CorpusEntry {
                header: None,
                source: Some(rel),
            }),
        }
    }

    let mut entries: Vec<CorpusEntry> = grouped.into_values().chain(singles).collect();
    entries.sort_by(|a, b| a.rel_path().cmp(b.rel_path()));
    Ok(entries)
}
