use super::{CaseError, Entry, FoamNode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Key(String),
    Index(usize),
}

/// Split `a.b[0].c` into segments.
pub fn parse_keypath(path: &str) -> Result<Vec<Segment>, CaseError> {
    let bad = || CaseError::BadKeypath(path.to_string());
    if path.is_empty() {
        return Err(bad());
    }
    let mut segments = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() && (segments.is_empty() || rest.is_empty()) {
            return Err(bad());
        }
        if !key.is_empty() {
            segments.push(Segment::Key(key.to_string()));
        }
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            let index = rest[1..close].parse::<usize>().map_err(|_| bad())?;
            segments.push(Segment::Index(index));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(bad());
            }
        }
    }
    Ok(segments)
}

fn render(segments: &[Segment]) -> String {
    let mut out = String::new();
    for segment in segments {
        match segment {
            Segment::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            Segment::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

fn step<'n>(node: &'n FoamNode, segments: &[Segment], depth: usize) -> Result<&'n FoamNode, CaseError> {
    match (&segments[depth], node) {
        (Segment::Key(key), FoamNode::Dict(_)) => node.get(key).ok_or_else(|| CaseError::PathNotFound {
            prefix: render(&segments[..depth]),
        }),
        (Segment::Index(i), FoamNode::List(items) | FoamNode::Sequence(items)) => {
            items.get(*i).ok_or_else(|| CaseError::IndexOutOfRange {
                path: render(&segments[..=depth]),
                index: *i,
                len: items.len(),
            })
        }
        _ => Err(CaseError::PathNotFound {
            prefix: render(&segments[..depth]),
        }),
    }
}

pub fn get_entry<'n>(node: &'n FoamNode, keypath: &str) -> Result<&'n FoamNode, CaseError> {
    let segments = parse_keypath(keypath)?;
    let mut current = node;
    for depth in 0..segments.len() {
        current = step(current, &segments, depth)?;
    }
    Ok(current)
}

fn slot<'n>(node: &'n mut FoamNode, segments: &[Segment], depth: usize) -> Result<&'n mut FoamNode, CaseError> {
    let not_found = || CaseError::PathNotFound {
        prefix: render(&segments[..depth]),
    };
    match (&segments[depth], node) {
        (Segment::Key(key), FoamNode::Dict(entries)) => entries
            .iter_mut()
            .rev()
            .find_map(|e| match e {
                Entry::KeyValue { key: k, value } if k == key => Some(value),
                _ => None,
            })
            .ok_or_else(not_found),
        (Segment::Index(i), FoamNode::List(items) | FoamNode::Sequence(items)) => {
            let len = items.len();
            items.get_mut(*i).ok_or_else(|| CaseError::IndexOutOfRange {
                path: render(&segments[..=depth]),
                index: *i,
                len,
            })
        }
        _ => Err(not_found()),
    }
}

fn resolve_mut<'n>(node: &'n mut FoamNode, segments: &[Segment]) -> Result<&'n mut FoamNode, CaseError> {
    let mut current = node;
    for depth in 0..segments.len() {
        current = slot(current, segments, depth)?;
    }
    Ok(current)
}

/// Copy of `node` with the existing entry at `keypath` replaced.
pub fn set_entry(node: &FoamNode, keypath: &str, value: FoamNode) -> Result<FoamNode, CaseError> {
    let segments = parse_keypath(keypath)?;
    let mut out = node.clone();
    *resolve_mut(&mut out, &segments)? = value;
    Ok(out)
}

/// Like [`set_entry`] but adds the final key to its parent dict when absent.
pub fn insert_entry(node: &FoamNode, keypath: &str, value: FoamNode) -> Result<FoamNode, CaseError> {
    let segments = parse_keypath(keypath)?;
    let Some((Segment::Key(key), parent_path)) = segments.split_last() else {
        return set_entry(node, keypath, value);
    };
    let mut out = node.clone();
    let parent = resolve_mut(&mut out, parent_path)?;
    if !matches!(parent, FoamNode::Dict(_)) {
        return Err(CaseError::PathNotFound {
            prefix: render(parent_path),
        });
    }
    parent.upsert(key, value);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{parse_dict, serialize_dict};

    const TOPO: &str = "actions\n(\n    {\n        name burner;\n        sourceInfo\n        {\n            box (-0.15 -0.15 -0.001) (0.15 0.15 0.001);\n        }\n    }\n);\n";

    #[test]
    fn keypath_grammar() {
        assert_eq!(
            parse_keypath("actions[0].sourceInfo.box").unwrap(),
            vec![
                Segment::Key("actions".into()),
                Segment::Index(0),
                Segment::Key("sourceInfo".into()),
                Segment::Key("box".into()),
            ]
        );
        assert_eq!(parse_keypath("m[1][2]").unwrap().len(), 3);
        for bad in ["", "a..b", "a[x]", "a[1", "a[1]b", "[0]"] {
            assert!(parse_keypath(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn double_the_burner() {
        let node = parse_dict(TOPO).unwrap();
        let path = "actions[0].sourceInfo.box";
        let FoamNode::Sequence(points) = get_entry(&node, path).unwrap() else { panic!() };
        let doubled: Vec<FoamNode> = points
            .iter()
            .map(|p| {
                let FoamNode::List(xs) = p else { panic!() };
                FoamNode::List(
                    xs.iter()
                        .enumerate()
                        .map(|(i, x)| FoamNode::float(if i < 2 { x.as_f64().unwrap() * 2.0 } else { x.as_f64().unwrap() }))
                        .collect(),
                )
            })
            .collect();
        let edited = set_entry(&node, path, FoamNode::Sequence(doubled.clone())).unwrap();
        assert!(serialize_dict(&edited).contains("(-0.3 -0.3 -0.001) (0.3 0.3 0.001)"));
        assert_eq!(get_entry(&edited, path).unwrap(), &FoamNode::Sequence(doubled));
        // original untouched
        assert_eq!(get_entry(&node, path).unwrap(), &FoamNode::Sequence(points.clone()));
    }

    #[test]
    fn missing_paths() {
        let node = parse_dict(TOPO).unwrap();
        assert_eq!(
            get_entry(&node, "actions[0].nope.x").unwrap_err(),
            CaseError::PathNotFound {
                prefix: "actions[0]".into()
            }
        );
        assert_eq!(
            get_entry(&node, "missing").unwrap_err(),
            CaseError::PathNotFound { prefix: "".into() }
        );
        assert!(matches!(
            set_entry(&node, "actions[3]", FoamNode::int(1)),
            Err(CaseError::IndexOutOfRange { index: 3, len: 1, .. })
        ));
        assert!(set_entry(&node, "fresh", FoamNode::int(1)).is_err());
    }

    #[test]
    fn insert_adds_or_replaces() {
        let node = parse_dict("a { b 1; }").unwrap();
        let node = insert_entry(&node, "a.c", FoamNode::int(2)).unwrap();
        let node = insert_entry(&node, "a.b", FoamNode::int(3)).unwrap();
        assert_eq!(serialize_dict(&node), "a\n{\n    b 3;\n    c 2;\n}\n");
        assert!(insert_entry(&node, "a.b.c", FoamNode::int(1)).is_err());
    }

    #[test]
    fn last_duplicate_wins() {
        let node = parse_dict("k 1; k 2;").unwrap();
        assert_eq!(get_entry(&node, "k").unwrap(), &FoamNode::int(2));
        let edited = set_entry(&node, "k", FoamNode::int(5)).unwrap();
        assert_eq!(serialize_dict(&edited), "k 1;\nk 5;\n");
    }
}
