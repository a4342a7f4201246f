//! Serial runs and SLURM batch jobs.

mod decompose;
mod resources;
mod runner;
mod serial;
mod slurm;

use std::path::PathBuf;

pub use decompose::{write_decompose_dict, RunState, DECOMPOSE_DICT};
pub use resources::{
    choose_layout, parse_cell_count, parse_resources, read_mesh_stats, ClusterResources, Layout, MeshStats,
    Partition, DEFAULT_CELLS_PER_CORE, MESH_LOGS,
};
pub use runner::{source_prefix, GatedRunner, ShellOutput, ShellRunner, SystemRunner};
pub use serial::{run_serial, SERIAL_LOG, SERIAL_TIMEOUT};
pub use slurm::{
    discover_resources, parse_job_state, plan_job, poll_status, render_slurm_script, submit, JobPlan, JobSpec,
    JobState, JobStatus, DEFAULT_SOLVER, SCRIPT_NAME, SINFO_COMMAND,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HpcError {
    #[error("no partitions found in scheduler output")]
    NoPartitions,
    #[error("partition {0:?} not available")]
    UnknownPartition(String),
    #[error("cell count not found in mesh log")]
    CellCountNotFound,
    #[error("case directory not found: {}", .0.display())]
    CaseMissing(PathBuf),
    #[error("mesh script not found: {}", .0.display())]
    MeshScriptMissing(PathBuf),
    #[error("{stage} stage failed with exit code {exit_code:?}:\n{log_tail}")]
    StageFailed {
        stage: String,
        exit_code: Option<i32>,
        log_tail: String,
    },
    #[error("sbatch failed: {0}")]
    SubmitFailed(String),
    #[error("no job id in sbatch output: {0:?}")]
    JobIdNotFound(String),
    #[error("scheduler unavailable: {0}")]
    SchedulerUnavailable(String),
    #[error("command denied: {0}")]
    Denied(String),
    #[error("session aborted")]
    Aborted,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Case(#[from] crate::case::CaseError),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HpcError {
    fn from(e: std::io::Error) -> Self {
        HpcError::Io(e.to_string())
    }
}

/// Last `lines` lines of `text`.
pub(crate) fn tail_lines(text: &str, lines: usize) -> String {
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}
