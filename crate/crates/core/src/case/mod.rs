//! Dictionary files and case directories.

mod ast;
mod diff;
mod keypath;
mod parse;
mod serialize;
mod tree;

use std::path::PathBuf;

pub use ast::{Entry, FoamNode, Scalar};
pub use diff::{changed_files, diff_case, format_changes, CaseChange};
pub use keypath::{get_entry, insert_entry, parse_keypath, set_entry, Segment};
pub use parse::parse_dict;
pub use serialize::{node_text, serialize_dict};
pub use tree::{
    build_config_prompt, file_header, flatten_case, flatten_tree, load_case, strip_boilerplate, CaseSnapshot,
    CaseTree, FileRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at line {line}, column {column}: expected {expected}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaseError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("path not found after {prefix:?}")]
    PathNotFound { prefix: String },
    #[error("index {index} out of range for {path} (length {len})")]
    IndexOutOfRange { path: String, index: usize, len: usize },
    #[error("bad keypath {0:?}")]
    BadKeypath(String),
    #[error("case root not found: {}", .0.display())]
    RootMissing(PathBuf),
    #[error("io error: {0}")]
    Io(String),
}
