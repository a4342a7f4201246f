use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::runner::quote;
use super::{
    choose_layout, parse_resources, read_mesh_stats, tail_lines, write_decompose_dict, ClusterResources, HpcError,
    Layout, MeshStats, RunState, ShellRunner,
};

pub const SINFO_COMMAND: &str = r#"sinfo -h -o "%P %D %c""#;
pub const DEFAULT_SOLVER: &str = "fireFoam";
pub const SCRIPT_NAME: &str = "job.slurm";
const SCHEDULER_TIMEOUT: Duration = Duration::from_secs(60);

static JOB_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Submitted batch job ([0-9]+)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_name: String,
    pub partition: String,
    pub nodes: u32,
    pub ntasks: u32,
    pub bashrc_path: PathBuf,
    pub case_path: PathBuf,
    pub solver: String,
    pub log_name: String,
}

impl JobSpec {
    pub fn new(layout: &Layout, bashrc_path: &Path, case_path: &Path) -> Self {
        let job_name = case_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| DEFAULT_SOLVER.to_string());
        Self {
            job_name,
            partition: layout.partition.clone(),
            nodes: layout.nodes,
            ntasks: layout.ntasks,
            bashrc_path: bashrc_path.to_path_buf(),
            case_path: case_path.to_path_buf(),
            solver: DEFAULT_SOLVER.to_string(),
            log_name: format!("log.{DEFAULT_SOLVER}"),
        }
    }
}

/// Batch script that loads the solver environment and launches one rank per core.
pub fn render_slurm_script(spec: &JobSpec) -> String {
    [
        "#!/bin/bash".to_string(),
        format!("#SBATCH --job-name={}", spec.job_name),
        format!("#SBATCH --partition={}", spec.partition),
        format!("#SBATCH --nodes={}", spec.nodes),
        format!("#SBATCH --ntasks={}", spec.ntasks),
        format!("#SBATCH --output={}.slurm", spec.log_name),
        format!("source {}", quote(&spec.bashrc_path.to_string_lossy())),
        format!("cd {}", quote(&spec.case_path.to_string_lossy())),
        format!("mpirun -np {} {} -parallel > {} 2>&1", spec.ntasks, spec.solver, spec.log_name),
        String::new(),
    ]
    .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Completed,
    Failed,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: u64,
    pub state: JobState,
}

/// Map a squeue/sacct state token.
pub fn parse_job_state(token: &str) -> JobState {
    let token = token.trim().trim_end_matches('+').to_ascii_uppercase();
    match token.as_str() {
        "PENDING" | "CONFIGURING" | "REQUEUED" | "SUSPENDED" => JobState::Pending,
        "RUNNING" | "COMPLETING" => JobState::Running,
        "COMPLETED" => JobState::Completed,
        "FAILED" | "CANCELLED" | "TIMEOUT" | "NODE_FAIL" | "OUT_OF_MEMORY" | "PREEMPTED" | "BOOT_FAIL"
        | "DEADLINE" => JobState::Failed,
        _ => JobState::Unknown,
    }
}

/// Submit `script_path` with sbatch from its directory.
pub fn submit(script_path: &Path, runner: &dyn ShellRunner) -> Result<JobStatus, HpcError> {
    if !script_path.is_file() {
        return Err(HpcError::InvalidInput(format!("script not found: {}", script_path.display())));
    }
    let workdir = script_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let command = format!("sbatch {}", quote(&script_path.to_string_lossy()));
    let out = runner.run(&command, workdir, SCHEDULER_TIMEOUT)?;
    if !out.success() {
        return Err(HpcError::SubmitFailed(tail_lines(&out.output, 10)));
    }
    let job_id = JOB_ID
        .captures(&out.output)
        .and_then(|c| c[1].parse::<u64>().ok())
        .filter(|id| *id > 0)
        .ok_or_else(|| HpcError::JobIdNotFound(tail_lines(&out.output, 5)))?;
    Ok(JobStatus {
        job_id,
        state: JobState::Pending,
    })
}

/// Ask squeue, then sacct, for the state of `job_id`.
pub fn poll_status(job_id: u64, runner: &dyn ShellRunner, workdir: &Path) -> Result<JobStatus, HpcError> {
    if job_id == 0 {
        return Err(HpcError::InvalidInput("job id must be positive".into()));
    }
    let status = |state| Ok(JobStatus { job_id, state });
    let squeue = runner.run(&format!("squeue -h -j {job_id} -o %T"), workdir, SCHEDULER_TIMEOUT)?;
    if squeue.exit_code == Some(127) {
        return Err(HpcError::SchedulerUnavailable(tail_lines(&squeue.output, 3)));
    }
    if squeue.success() {
        if let Some(token) = squeue.output.split_whitespace().next() {
            return status(parse_job_state(token));
        }
    }
    let sacct = runner.run(&format!("sacct -n -X -j {job_id} -o State"), workdir, SCHEDULER_TIMEOUT)?;
    if sacct.success() {
        if let Some(token) = sacct.output.split_whitespace().next() {
            return status(parse_job_state(token));
        }
    }
    status(JobState::Unknown)
}

pub fn discover_resources(runner: &dyn ShellRunner, workdir: &Path) -> Result<ClusterResources, HpcError> {
    let out = runner.run(SINFO_COMMAND, workdir, SCHEDULER_TIMEOUT)?;
    if !out.success() {
        return Err(HpcError::SchedulerUnavailable(tail_lines(&out.output, 3)));
    }
    parse_resources(&out.output)
}

/// Everything prepared for a batch run: layout, decomposition and script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobPlan {
    pub resources: ClusterResources,
    pub mesh: MeshStats,
    pub layout: Layout,
    pub spec: JobSpec,
    pub decompose_dict: PathBuf,
    pub script_path: PathBuf,
}

/// Size a job from the scheduler's partitions and an existing mesh log,
/// then write the decomposition dictionary and the batch script.
pub fn plan_job(
    case_root: &Path,
    bashrc_path: &Path,
    runner: &dyn ShellRunner,
    cells_per_core: u64,
    partition: Option<&str>,
) -> Result<JobPlan, HpcError> {
    if !case_root.is_dir() {
        return Err(HpcError::CaseMissing(case_root.to_path_buf()));
    }
    let resources = discover_resources(runner, case_root)?;
    let mesh = read_mesh_stats(case_root)?;
    let layout = choose_layout(mesh.cell_count, &resources, cells_per_core, partition)?;
    let decompose_dict = write_decompose_dict(case_root, layout.ntasks, &mut RunState::default())?;
    let spec = JobSpec::new(&layout, bashrc_path, case_root);
    let script_path = case_root.join(SCRIPT_NAME);
    std::fs::write(&script_path, render_slurm_script(&spec))?;
    Ok(JobPlan {
        resources,
        mesh,
        layout,
        spec,
        decompose_dict,
        script_path,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;
    use std::sync::Mutex;

    use super::*;
    use crate::hpc::ShellOutput;

    /// Replays canned outputs and records commands.
    struct Replay {
        outputs: Mutex<VecDeque<ShellOutput>>,
        commands: Mutex<Vec<String>>,
    }

    impl Replay {
        fn new(outputs: &[(i32, &str)]) -> Self {
            Self {
                outputs: Mutex::new(
                    outputs
                        .iter()
                        .map(|(code, out)| ShellOutput {
                            exit_code: Some(*code),
                            output: out.to_string(),
                        })
                        .collect(),
                ),
                commands: Mutex::new(Vec::new()),
            }
        }
    }

    impl ShellRunner for Replay {
        fn run(&self, command: &str, _: &Path, _: Duration) -> Result<ShellOutput, HpcError> {
            self.commands.lock().unwrap().push(command.to_string());
            Ok(self.outputs.lock().unwrap().pop_front().expect("scripted output"))
        }
    }

    fn spec() -> JobSpec {
        JobSpec {
            job_name: "poolFire".into(),
            partition: "compute".into(),
            nodes: 1,
            ntasks: 32,
            bashrc_path: "/opt/openfoam/etc/bashrc".into(),
            case_path: "/scratch/poolFire".into(),
            solver: "fireFoam".into(),
            log_name: "log.fireFoam".into(),
        }
    }

    #[test]
    fn script_layout() {
        let text = render_slurm_script(&spec());
        assert_eq!(
            text,
            "#!/bin/bash\n#SBATCH --job-name=poolFire\n#SBATCH --partition=compute\n#SBATCH --nodes=1\n#SBATCH --ntasks=32\n#SBATCH --output=log.fireFoam.slurm\nsource /opt/openfoam/etc/bashrc\ncd /scratch/poolFire\nmpirun -np 32 fireFoam -parallel > log.fireFoam 2>&1\n"
        );
        let debug = render_slurm_script(&JobSpec { partition: "debug".into(), ..spec() });
        assert!(debug.contains("#SBATCH --partition=debug\n"));
        let lines: Vec<&str> = text.lines().collect();
        let source = lines.iter().position(|l| l.starts_with("source ")).unwrap();
        let mpirun = lines.iter().position(|l| l.starts_with("mpirun ")).unwrap();
        assert!(source < mpirun);
    }

    #[test]
    fn submit_parses_job_id() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join(SCRIPT_NAME);
        std::fs::write(&script, "#!/bin/bash\n").unwrap();

        let runner = Replay::new(&[(0, "Submitted batch job 4242\n")]);
        assert_eq!(submit(&script, &runner).unwrap(), JobStatus { job_id: 4242, state: JobState::Pending });
        assert_eq!(runner.commands.lock().unwrap()[0], format!("sbatch {}", script.display()));

        let runner = Replay::new(&[(1, "sbatch: error: invalid partition")]);
        assert!(matches!(submit(&script, &runner), Err(HpcError::SubmitFailed(m)) if m.contains("invalid partition")));

        let runner = Replay::new(&[(0, "queued\n")]);
        assert!(matches!(submit(&script, &runner), Err(HpcError::JobIdNotFound(_))));
    }

    #[test]
    fn poll_maps_states() {
        let dir = Path::new("/");
        assert_eq!(poll_status(7, &Replay::new(&[(0, "RUNNING\n")]), dir).unwrap().state, JobState::Running);
        assert_eq!(poll_status(7, &Replay::new(&[(0, "PENDING\n")]), dir).unwrap().state, JobState::Pending);
        assert_eq!(
            poll_status(7, &Replay::new(&[(0, ""), (1, "sacct: not configured")]), dir).unwrap().state,
            JobState::Unknown
        );
        assert_eq!(
            poll_status(7, &Replay::new(&[(1, "Invalid job id"), (0, "COMPLETED\n")]), dir).unwrap().state,
            JobState::Completed
        );
        assert_eq!(
            poll_status(7, &Replay::new(&[(0, ""), (0, "CANCELLED+\n")]), dir).unwrap().state,
            JobState::Failed
        );
        assert!(matches!(
            poll_status(7, &Replay::new(&[(127, "squeue: command not found")]), dir),
            Err(HpcError::SchedulerUnavailable(_))
        ));
    }

    #[test]
    fn plan_is_consistent() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("log.checkMesh"), "    cells:            1600000\n").unwrap();
        let runner = Replay::new(&[(0, "compute* 4 32\n")]);
        let plan = plan_job(dir.path(), Path::new("/opt/of/bashrc"), &runner, 50_000, None).unwrap();
        assert_eq!(runner.commands.lock().unwrap()[0], SINFO_COMMAND);
        assert_eq!((plan.layout.nodes, plan.layout.ntasks), (1, 32));
        let dict = std::fs::read_to_string(&plan.decompose_dict).unwrap();
        let script = std::fs::read_to_string(&plan.script_path).unwrap();
        assert!(dict.contains("numberOfSubdomains 32;"));
        assert!(script.contains("#SBATCH --ntasks=32\n"));
        assert!(script.contains("mpirun -np 32 fireFoam -parallel"));
    }
}
