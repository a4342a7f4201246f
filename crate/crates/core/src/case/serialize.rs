use super::{Entry, FoamNode, Scalar};

const INDENT: &str = "    ";
const INLINE_LIMIT: usize = 80;

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

fn scalar_text(scalar: &Scalar) -> String {
    match scalar {
        Scalar::Int(v) => v.to_string(),
        Scalar::Float(v) => format!("{v:?}"),
        Scalar::Word(w) => w.clone(),
        Scalar::Str(s) => format!("\"{s}\""),
        Scalar::Bool(b) => b.to_string(),
    }
}

fn contains_dict(node: &FoamNode) -> bool {
    match node {
        FoamNode::Dict(_) => true,
        FoamNode::List(items) | FoamNode::Sequence(items) => items.iter().any(contains_dict),
        _ => false,
    }
}

/// Render a value whose first line continues the current one and whose
/// later lines are indented at `depth`.
fn value_text(node: &FoamNode, depth: usize) -> String {
    match node {
        FoamNode::Scalar(s) => scalar_text(s),
        FoamNode::Dimensions(d) => {
            format!("[{}]", d.map(|v| v.to_string()).join(" "))
        }
        FoamNode::Directive(text) => text.clone(),
        FoamNode::Sequence(items) => items
            .iter()
            .map(|item| value_text(item, depth))
            .collect::<Vec<_>>()
            .join(" "),
        FoamNode::List(items) => {
            if !contains_dict(node) {
                let inline = format!(
                    "({})",
                    items
                        .iter()
                        .map(|item| value_text(item, depth))
                        .collect::<Vec<_>>()
                        .join(" ")
                );
                if inline.len() <= INLINE_LIMIT && !inline.contains('\n') {
                    return inline;
                }
            }
            let mut out = String::from("(\n");
            for item in items {
                out.push_str(&pad(depth + 1));
                out.push_str(&value_text(item, depth + 1));
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push(')');
            out
        }
        FoamNode::Dict(entries) => {
            let mut out = String::from("{\n");
            write_entries(&mut out, entries, depth + 1);
            out.push_str(&pad(depth));
            out.push('}');
            out
        }
    }
}

fn write_entries(out: &mut String, entries: &[Entry], depth: usize) {
    let indent = pad(depth);
    for entry in entries {
        match entry {
            Entry::Directive { text } => {
                out.push_str(&indent);
                out.push_str(text);
                out.push('\n');
            }
            Entry::KeyValue { key, value: FoamNode::Dict(inner) } => {
                out.push_str(&format!("{indent}{key}\n{indent}{{\n"));
                write_entries(out, inner, depth + 1);
                out.push_str(&format!("{indent}}}\n"));
            }
            Entry::KeyValue {
                key,
                value: FoamNode::Sequence(items),
            } if items.is_empty() => {
                out.push_str(&format!("{indent}{key};\n"));
            }
            Entry::KeyValue { key, value } => {
                out.push_str(&format!("{indent}{key} {};\n", value_text(value, depth)));
            }
        }
    }
}

/// Canonical text for a dictionary (or any node, rendered as a value).
pub fn serialize_dict(node: &FoamNode) -> String {
    match node {
        FoamNode::Dict(entries) => {
            let mut out = String::new();
            write_entries(&mut out, entries, 0);
            out
        }
        other => value_text(other, 0),
    }
}

/// Single-line-ish rendering used in diffs and tool output.
pub fn node_text(node: &FoamNode) -> String {
    value_text(node, 0)
}
