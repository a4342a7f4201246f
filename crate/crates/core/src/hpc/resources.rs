use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::HpcError;

pub const DEFAULT_CELLS_PER_CORE: u64 = 50_000;

/// Logs searched for the mesh size, most authoritative first.
pub const MESH_LOGS: &[&str] = &["log.checkMesh", "log.snappyHexMesh", "log.blockMesh"];

static CELLS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"cells:\s*([0-9]+)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub node_count: u32,
    pub cores_per_node: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterResources {
    pub partitions: Vec<Partition>,
    /// Partition marked with `*` by sinfo.
    pub default_partition: Option<String>,
    /// Lines that could not be read.
    pub warnings: usize,
}

impl ClusterResources {
    pub fn get(&self, name: &str) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.name == name)
    }

    /// The default-marked partition, else the first listed.
    pub fn preferred(&self) -> Option<&Partition> {
        self.default_partition
            .as_deref()
            .and_then(|name| self.get(name))
            .or_else(|| self.partitions.first())
    }
}

fn parse_count(field: &str) -> Option<u32> {
    field.trim_end_matches('+').parse::<u32>().ok().filter(|v| *v >= 1)
}

/// Read `sinfo -h -o "%P %D %c"` output.
pub fn parse_resources(sinfo_output: &str) -> Result<ClusterResources, HpcError> {
    let mut resources = ClusterResources {
        partitions: Vec::new(),
        default_partition: None,
        warnings: 0,
    };
    for line in sinfo_output.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [name, nodes, cores] => parse_count(nodes).zip(parse_count(cores)).map(|(n, c)| (*name, n, c)),
            _ => None,
        };
        let Some((raw_name, node_count, cores_per_node)) = parsed else {
            warn!(line, "unreadable sinfo line");
            resources.warnings += 1;
            continue;
        };
        let name = raw_name.trim_end_matches('*');
        if name.is_empty() {
            resources.warnings += 1;
            continue;
        }
        if raw_name.ends_with('*') && resources.default_partition.is_none() {
            resources.default_partition = Some(name.to_string());
        }
        match resources.partitions.iter_mut().find(|p| p.name == name) {
            Some(existing) => {
                existing.node_count += node_count;
                existing.cores_per_node = existing.cores_per_node.min(cores_per_node);
            }
            None => resources.partitions.push(Partition {
                name: name.to_string(),
                node_count,
                cores_per_node,
            }),
        }
    }
    if resources.partitions.is_empty() {
        return Err(HpcError::NoPartitions);
    }
    Ok(resources)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshStats {
    pub cell_count: u64,
    pub source_log: PathBuf,
}

/// Cell count from the last `cells:` line of a mesh utility log.
pub fn parse_cell_count(log_text: &str) -> Result<u64, HpcError> {
    CELLS
        .captures_iter(log_text)
        .last()
        .and_then(|c| c[1].parse::<u64>().ok())
        .filter(|n| *n > 0)
        .ok_or(HpcError::CellCountNotFound)
}

/// Mesh size from the first readable log in [`MESH_LOGS`] under `case_root`.
pub fn read_mesh_stats(case_root: &Path) -> Result<MeshStats, HpcError> {
    for name in MESH_LOGS {
        let path = case_root.join(name);
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        if let Ok(cell_count) = parse_cell_count(&text) {
            return Ok(MeshStats {
                cell_count,
                source_log: path,
            });
        }
    }
    Err(HpcError::CellCountNotFound)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub partition: String,
    pub nodes: u32,
    pub ntasks: u32,
    pub cores_per_node: u32,
}

/// Whole nodes sized to the mesh, clamped to the partition.
pub fn choose_layout(
    cells: u64,
    resources: &ClusterResources,
    cells_per_core: u64,
    partition: Option<&str>,
) -> Result<Layout, HpcError> {
    if cells == 0 || cells_per_core == 0 {
        return Err(HpcError::InvalidInput("cells and cells_per_core must be positive".into()));
    }
    let chosen = match partition {
        Some(name) => resources
            .get(name)
            .ok_or_else(|| HpcError::UnknownPartition(name.to_string()))?,
        None => resources.preferred().ok_or(HpcError::NoPartitions)?,
    };
    let desired = cells.div_ceil(cells_per_core);
    let cpn = u64::from(chosen.cores_per_node);
    let nodes = desired.div_ceil(cpn).min(u64::from(chosen.node_count)).max(1) as u32;
    Ok(Layout {
        partition: chosen.name.clone(),
        nodes,
        ntasks: nodes * chosen.cores_per_node,
        cores_per_node: chosen.cores_per_node,
    })
}
