use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::HpcError;
use crate::case::{parse_dict, serialize_dict, Entry, FoamNode};

pub const DECOMPOSE_DICT: &str = "system/decomposeParDict";

/// Files already backed up during this run.
#[derive(Debug, Default, Clone)]
pub struct RunState {
    backed_up: HashSet<PathBuf>,
}

fn fresh_dict() -> FoamNode {
    FoamNode::Dict(vec![Entry::kv(
        "FoamFile",
        FoamNode::Dict(vec![
            Entry::kv("version", FoamNode::float(2.0)),
            Entry::kv("format", FoamNode::word("ascii")),
            Entry::kv("class", FoamNode::word("dictionary")),
            Entry::kv("object", FoamNode::word("decomposeParDict")),
        ]),
    )])
}

/// Set the subdomain count and scotch method, keeping other entries of an
/// existing dictionary. The previous file is kept as `.bak` once per run.
pub fn write_decompose_dict(case_root: &Path, ntasks: u32, state: &mut RunState) -> Result<PathBuf, HpcError> {
    if !case_root.is_dir() {
        return Err(HpcError::CaseMissing(case_root.to_path_buf()));
    }
    if ntasks == 0 {
        return Err(HpcError::InvalidInput("ntasks must be at least 1".into()));
    }
    let path = case_root.join(DECOMPOSE_DICT);
    std::fs::create_dir_all(path.parent().expect("has parent"))?;
    let mut dict = match std::fs::read_to_string(&path) {
        Ok(existing) => {
            if state.backed_up.insert(path.clone()) {
                std::fs::write(path.with_extension("bak"), &existing)?;
            }
            parse_dict(&existing).unwrap_or_else(|_| fresh_dict())
        }
        Err(_) => fresh_dict(),
    };
    dict.upsert("numberOfSubdomains", FoamNode::int(i64::from(ntasks)));
    dict.upsert("method", FoamNode::word("scotch"));
    std::fs::write(&path, serialize_dict(&dict))?;
    Ok(path)
}
