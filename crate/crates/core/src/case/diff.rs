use serde::{Deserialize, Serialize};
use similar::{DiffTag, TextDiff};

use super::{node_text, CaseTree, Entry, FoamNode};

/// One difference between two case trees. `keypath` is set for structural
/// changes inside parsed dictionaries; `None` for whole-file or line changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseChange {
    pub rel_path: String,
    pub keypath: Option<String>,
    pub old: Option<String>,
    pub new: Option<String>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn keyed(entries: &[Entry]) -> Vec<(&str, &FoamNode)> {
    // last duplicate wins, first-seen order kept
    let mut out: Vec<(&str, &FoamNode)> = Vec::new();
    for entry in entries {
        if let Entry::KeyValue { key, value } = entry {
            match out.iter_mut().find(|(k, _)| k == key) {
                Some(slot) => slot.1 = value,
                None => out.push((key, value)),
            }
        }
    }
    out
}

fn directives(entries: &[Entry]) -> Vec<&str> {
    entries
        .iter()
        .filter_map(|e| match e {
            Entry::Directive { text } => Some(text.as_str()),
            _ => None,
        })
        .collect()
}

fn diff_nodes(rel: &str, path: &str, old: &FoamNode, new: &FoamNode, out: &mut Vec<CaseChange>) {
    if old == new {
        return;
    }
    let change = |out: &mut Vec<CaseChange>, old: Option<String>, new: Option<String>| {
        out.push(CaseChange {
            rel_path: rel.to_string(),
            keypath: Some(path.to_string()),
            old,
            new,
        })
    };
    match (old, new) {
        (FoamNode::Dict(a), FoamNode::Dict(b)) => {
            let (da, db) = (directives(a), directives(b));
            if da != db {
                change(out, Some(da.join("\n")), Some(db.join("\n")));
            }
            let (ka, kb) = (keyed(a), keyed(b));
            for (key, va) in &ka {
                let sub = join(path, key);
                match kb.iter().find(|(k, _)| k == key) {
                    Some((_, vb)) => diff_nodes(rel, &sub, va, vb, out),
                    None => out.push(CaseChange {
                        rel_path: rel.to_string(),
                        keypath: Some(sub),
                        old: Some(node_text(va)),
                        new: None,
                    }),
                }
            }
            for (key, vb) in &kb {
                if !ka.iter().any(|(k, _)| k == key) {
                    out.push(CaseChange {
                        rel_path: rel.to_string(),
                        keypath: Some(join(path, key)),
                        old: None,
                        new: Some(node_text(vb)),
                    });
                }
            }
        }
        (FoamNode::List(a), FoamNode::List(b))
            if a.len() == b.len() && a.iter().any(|n| matches!(n, FoamNode::Dict(_))) =>
        {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                diff_nodes(rel, &format!("{path}[{i}]"), x, y, out);
            }
        }
        _ => change(out, Some(node_text(old)), Some(node_text(new))),
    }
}

fn diff_lines(rel: &str, old: &str, new: &str, out: &mut Vec<CaseChange>) {
    let diff = TextDiff::from_lines(old, new);
    for op in diff.ops() {
        if op.tag() == DiffTag::Equal {
            continue;
        }
        let old_lines = &diff.old_slices()[op.old_range()];
        let new_lines = &diff.new_slices()[op.new_range()];
        let text = |lines: &[&str]| (!lines.is_empty()).then(|| lines.concat());
        out.push(CaseChange {
            rel_path: rel.to_string(),
            keypath: None,
            old: text(old_lines),
            new: text(new_lines),
        });
    }
}

/// Structural diff for parsed files, line diff otherwise, sorted by path.
pub fn diff_case(before: &CaseTree, after: &CaseTree) -> Vec<CaseChange> {
    let mut out = Vec::new();
    let mut paths: Vec<&String> = before.files.keys().chain(after.files.keys()).collect();
    paths.sort();
    paths.dedup();
    for rel in paths {
        match (before.files.get(rel), after.files.get(rel)) {
            (Some(a), Some(b)) => match (&a.parsed, &b.parsed) {
                (Some(pa), Some(pb)) => diff_nodes(rel, "", pa, pb, &mut out),
                _ if a.raw != b.raw => diff_lines(rel, &a.raw, &b.raw, &mut out),
                _ => {}
            },
            (Some(a), None) => out.push(CaseChange {
                rel_path: rel.clone(),
                keypath: None,
                old: Some(a.raw.clone()),
                new: None,
            }),
            (None, Some(b)) => out.push(CaseChange {
                rel_path: rel.clone(),
                keypath: None,
                old: None,
                new: Some(b.raw.clone()),
            }),
            (None, None) => {}
        }
    }
    out
}

/// Distinct files touched by `changes`, in order.
pub fn changed_files(changes: &[CaseChange]) -> Vec<&str> {
    let mut files: Vec<&str> = changes.iter().map(|c| c.rel_path.as_str()).collect();
    files.dedup();
    files
}

/// Human-readable report, one change per block.
pub fn format_changes(changes: &[CaseChange]) -> String {
    let mut out = String::new();
    for change in changes {
        let location = match &change.keypath {
            Some(k) if !k.is_empty() => format!("{} :: {k}", change.rel_path),
            _ => change.rel_path.clone(),
        };
        out.push_str(&format!("~ {location}\n"));
        if let Some(old) = &change.old {
            for line in old.lines() {
                out.push_str(&format!("  - {line}\n"));
            }
        }
        if let Some(new) = &change.new {
            for line in new.lines() {
                out.push_str(&format!("  + {line}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::path::PathBuf;

    use super::*;
    use crate::case::{parse_dict, set_entry, FileRecord};

    fn tree(files: &[(&str, &str)]) -> CaseTree {
        CaseTree {
            root: PathBuf::from("/case"),
            files: files
                .iter()
                .map(|(rel, raw)| {
                    let parsed = rel.starts_with("system/").then(|| parse_dict(raw).ok()).flatten();
                    (
                        rel.to_string(),
                        FileRecord {
                            parsed,
                            raw: raw.to_string(),
                            skipped: false,
                            skip_reason: None,
                        },
                    )
                })
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn identical_trees() {
        let t = tree(&[("system/a", "x 1;"), ("Allrun", "run\n")]);
        assert!(diff_case(&t, &t).is_empty());
    }

    #[test]
    fn addition_and_removal() {
        let a = tree(&[("README", "hi\n")]);
        let b = tree(&[("NOTES", "new\n")]);
        let changes = diff_case(&a, &b);
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[0].rel_path, "NOTES");
        assert_eq!(changes[0].old, None);
        assert_eq!(changes[1].new, None);
    }

    #[test]
    fn structural_change_has_keypath() {
        let a = tree(&[("system/d", "a { b 1; c 2; } e 3;")]);
        let b = tree(&[("system/d", "a { b 1; c 5; } f 4;")]);
        let changes = diff_case(&a, &b);
        let paths: Vec<_> = changes.iter().map(|c| c.keypath.clone().unwrap()).collect();
        assert_eq!(paths, vec!["a.c", "e", "f"]);
        assert_eq!(changes[0].old.as_deref(), Some("2"));
        assert_eq!(changes[0].new.as_deref(), Some("5"));
    }

    #[test]
    fn raw_files_diff_by_line() {
        let a = tree(&[("Allrun", "one\ntwo\nthree\n")]);
        let b = tree(&[("Allrun", "one\n2\nthree\n")]);
        let changes = diff_case(&a, &b);
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].keypath, None);
        assert_eq!(changes[0].old.as_deref(), Some("two\n"));
        assert_eq!(changes[0].new.as_deref(), Some("2\n"));
    }

    #[test]
    fn single_edit_single_keypath() {
        let src = "actions ( { name b; sourceInfo { box (0 0 0) (1 1 1); } } );";
        let before = parse_dict(src).unwrap();
        let after = set_entry(&before, "actions[0].sourceInfo.box", FoamNode::int(0)).unwrap();
        let mut out = Vec::new();
        diff_nodes("system/topoSetDict", "", &before, &after, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].keypath.as_deref(), Some("actions[0].sourceInfo.box"));
        let report = format_changes(&out);
        assert!(report.contains("system/topoSetDict :: actions[0].sourceInfo.box"));
        assert_eq!(changed_files(&out), vec!["system/topoSetDict"]);
    }
}
