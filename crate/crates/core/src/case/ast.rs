use serde::{Deserialize, Serialize};

/// Parsed dictionary tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FoamNode {
    Dict(Vec<Entry>),
    List(Vec<FoamNode>),
    Scalar(Scalar),
    Dimensions([i32; 7]),
    /// `#include …`, `$var`, `#{ … #}` kept verbatim.
    Directive(String),
    /// Several value tokens after one keyword, e.g. `box (0 0 0) (1 1 1);`.
    Sequence(Vec<FoamNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry {
    KeyValue { key: String, value: FoamNode },
    Directive { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Word(String),
    /// Contents between the quotes, escapes untouched.
    Str(String),
    Bool(bool),
}

impl FoamNode {
    pub fn empty_dict() -> Self {
        FoamNode::Dict(Vec::new())
    }

    pub fn int(v: i64) -> Self {
        FoamNode::Scalar(Scalar::Int(v))
    }

    pub fn float(v: f64) -> Self {
        FoamNode::Scalar(Scalar::Float(v))
    }

    pub fn word(w: impl Into<String>) -> Self {
        FoamNode::Scalar(Scalar::Word(w.into()))
    }

    pub fn string(s: impl Into<String>) -> Self {
        FoamNode::Scalar(Scalar::Str(s.into()))
    }

    /// A list of floats, the usual shape of a point.
    pub fn vector(values: &[f64]) -> Self {
        FoamNode::List(values.iter().copied().map(FoamNode::float).collect())
    }

    pub fn as_dict(&self) -> Option<&[Entry]> {
        match self {
            FoamNode::Dict(entries) => Some(entries),
            _ => None,
        }
    }

    /// Numeric value of an Int or Float scalar.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FoamNode::Scalar(Scalar::Int(v)) => Some(*v as f64),
            FoamNode::Scalar(Scalar::Float(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            FoamNode::Scalar(Scalar::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            FoamNode::Scalar(Scalar::Word(w)) => Some(w),
            _ => None,
        }
    }

    /// Last value stored under `key` when this is a Dict.
    pub fn get(&self, key: &str) -> Option<&FoamNode> {
        self.as_dict()?.iter().rev().find_map(|e| match e {
            Entry::KeyValue { key: k, value } if k == key => Some(value),
            _ => None,
        })
    }

    /// Replace the last `key` entry or append a new one. No-op on non-dicts.
    pub fn upsert(&mut self, key: &str, value: FoamNode) {
        let FoamNode::Dict(entries) = self else { return };
        let slot = entries.iter_mut().rev().find_map(|e| match e {
            Entry::KeyValue { key: k, value } if k == key => Some(value),
            _ => None,
        });
        match slot {
            Some(slot) => *slot = value,
            None => entries.push(Entry::KeyValue {
                key: key.to_string(),
                value,
            }),
        }
    }
}

impl Entry {
    pub fn kv(key: impl Into<String>, value: FoamNode) -> Self {
        Entry::KeyValue { key: key.into(), value }
    }
}
