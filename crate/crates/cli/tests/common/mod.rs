#![allow(dead_code)]

use std::path::{Path, PathBuf};

use foampilot_cli::commands::{run, Environment};
use foampilot_cli::console::Console;
use serde_json::json;

pub fn action(tool: &str, input: &str) -> String {
    let blob = json!({ "action": tool, "action_input": input });
    format!("Thought: next step.\n```json\n{blob}\n```")
}

pub fn shell(command: &str) -> String {
    action("shell", command)
}

pub fn final_answer(text: &str) -> String {
    action("Final Answer", text)
}

pub fn write_script(dir: &Path, name: &str, responses: &[String]) -> PathBuf {
    let steps: Vec<_> = responses.iter().map(|r| json!({ "response": r })).collect();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&steps).unwrap()).unwrap();
    path
}

pub struct CliRun {
    pub code: i32,
    pub out: String,
    pub err: String,
}

/// Run the CLI in-process with `cwd` and no environment overrides.
pub fn run_cli(args: &[&str], stdin: &str, cwd: &Path) -> CliRun {
    run_cli_env(args, stdin, cwd, &[])
}

pub fn run_cli_env(args: &[&str], stdin: &str, cwd: &Path, vars: &[(&str, &str)]) -> CliRun {
    let (console, out, err) = Console::captured(stdin);
    let env = Environment {
        cwd: cwd.to_path_buf(),
        home: None,
        vars: vars.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    };
    let mut argv = vec!["foampilot"];
    argv.extend_from_slice(args);
    let code = run(argv, console, env);
    CliRun {
        code,
        out: out.text(),
        err: err.text(),
    }
}

pub fn pool_fire() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/cases/poolFire")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let target = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

pub fn write_executable(path: &Path, body: &str) {
    use std::os::unix::fs::PermissionsExt;
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, body).unwrap();
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755)).unwrap();
}

/// Model turns that double the burner with two in-place edits.
pub fn burner_resize_responses() -> Vec<String> {
    vec![
        shell("grep -n box system/topoSetDict"),
        shell(
            "sed -i 's/box (-0.15 -0.15 -0.001) (0.15 0.15 0.001);/box (-0.3 -0.3 -0.001) (0.3 0.3 0.001);/' system/topoSetDict",
        ),
        shell(
            "sed -i -e 's/min (-0.15 -0.15 0.0);/min (-0.3 -0.3 0.0);/' -e 's/max (0.15 0.15 0.0);/max (0.3 0.3 0.0);/' system/snappyHexMeshDict",
        ),
        final_answer("The burner now spans 0.6 m in topoSetDict and snappyHexMeshDict."),
    ]
}

/// Paths from `~ path :: keypath` lines of a diff report.
pub fn reported_files(report: &str) -> Vec<String> {
    let mut files: Vec<String> = report
        .lines()
        .filter_map(|l| l.strip_prefix("~ "))
        .map(|l| l.split(" :: ").next().unwrap_or(l).trim().to_string())
        .collect();
    files.dedup();
    files
}

/// A minimal case whose mesh script and solver are stubs on a private PATH.
pub struct StubCase {
    pub case: PathBuf,
    pub bashrc: PathBuf,
    pub bin: PathBuf,
}

pub fn stub_case(root: &Path) -> StubCase {
    let case = root.join("stubCase");
    let bin = root.join("bin");
    std::fs::create_dir_all(case.join("system")).unwrap();
    std::fs::write(case.join("system/controlDict"), "application fireFoam;\nendTime 1;\n").unwrap();
    write_executable(&case.join("mesh.sh"), "#!/bin/sh\necho 'Mesh stats' > log.checkMesh\necho '    cells:            1600000' >> log.checkMesh\n");
    write_executable(&bin.join("fireFoam"), "#!/bin/sh\necho 'STUB-SOLVER-SENTINEL'\necho 'End'\n");
    write_executable(
        &bin.join("sbatch"),
        &format!("#!/bin/sh\necho \"$@\" >> {}\necho 'Submitted batch job 4242'\n", root.join("sbatch.calls").display()),
    );
    let bashrc = root.join("bashrc");
    std::fs::write(&bashrc, format!("export PATH=\"{}:$PATH\"\n", bin.display())).unwrap();
    StubCase { case, bashrc, bin }
}
