use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{source_prefix, tail_lines, HpcError, ShellRunner};

pub const SERIAL_LOG: &str = "log.fireFoam";
/// Solver runs take far longer than an interactive command.
pub const SERIAL_TIMEOUT: Duration = Duration::from_secs(48 * 3600);
const TAIL: usize = 20;

/// Mesh with `./mesh.sh`, then run the solver into `log.fireFoam`.
pub fn run_serial(
    case_root: &Path,
    bashrc_path: &Path,
    runner: &dyn ShellRunner,
    timeout: Duration,
) -> Result<PathBuf, HpcError> {
    if !case_root.is_dir() {
        return Err(HpcError::CaseMissing(case_root.to_path_buf()));
    }
    let mesh_script = case_root.join("mesh.sh");
    if !mesh_script.is_file() {
        return Err(HpcError::MeshScriptMissing(mesh_script));
    }
    let prefix = source_prefix(bashrc_path);

    let mesh = runner.run(&format!("{prefix}./mesh.sh"), case_root, timeout)?;
    if !mesh.success() {
        return Err(HpcError::StageFailed {
            stage: "mesh".into(),
            exit_code: mesh.exit_code,
            log_tail: tail_lines(&mesh.output, TAIL),
        });
    }

    let log = case_root.join(SERIAL_LOG);
    let solve = runner.run(&format!("{prefix}fireFoam > {SERIAL_LOG} 2>&1"), case_root, timeout)?;
    if !solve.success() {
        let text = std::fs::read_to_string(&log).unwrap_or(solve.output);
        return Err(HpcError::StageFailed {
            stage: "solver".into(),
            exit_code: solve.exit_code,
            log_tail: tail_lines(&text, TAIL),
        });
    }
    Ok(log)
}
