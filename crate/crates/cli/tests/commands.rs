mod common;

use std::path::Path;

use common::*;
use foampilot_core::index::load_index;

fn corpus(root: &Path) -> std::path::PathBuf {
    let src = root.join("src");
    std::fs::create_dir_all(src.join("combustion")).unwrap();
    std::fs::write(src.join("combustion/eddyDissipation.H"), "class eddyDissipation\n{\n    scalar Cmix;\n};\n").unwrap();
    std::fs::write(src.join("combustion/eddyDissipation.C"), "void eddyDissipation::correct()\n{\n    // rate\n}\n").unwrap();
    std::fs::write(src.join("pyrolysis.C"), "void pyrolysisModel::evolve() {}\n").unwrap();
    src
}

fn build_index(root: &Path) -> std::path::PathBuf {
    let src = corpus(root);
    let script = write_script(root, "none.json", &[]);
    let mock = format!("mock:{}", script.display());
    let out = root.join("code.fpix");
    let run = run_cli(
        &["--llm", &mock, "index", "--src", src.to_str().unwrap(), "--out", out.to_str().unwrap()],
        "",
        root,
    );
    assert_eq!(run.code, 0, "{}", run.err);
    out
}

#[test]
fn index_builds_file_and_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_index(dir.path());
    assert!(out.is_file());
    let index = load_index(&out).unwrap();
    assert_eq!(index.len(), 2);

    let script = write_script(dir.path(), "none.json", &[]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "index", "--src", "src", "--out", "again.fpix"], "", dir.path());
    assert_eq!(run.code, 0);
    assert!(run.out.contains("indexed 2 documents"), "{}", run.out);
    assert!(run.out.contains("0 documents truncated for embedding"));
    assert!(dir.path().join("again.fpix").is_file());
}

#[test]
fn index_reports_single_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let src = corpus(dir.path());
    let big: String = (0..20_000).map(|i| format!("token{i} ")).collect();
    std::fs::write(src.join("huge.C"), big).unwrap();
    let script = write_script(dir.path(), "none.json", &[]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "index", "--src", "src", "--out", "i.fpix"], "", dir.path());
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.lines().any(|l| l == "1 document truncated for embedding"), "{}", run.out);
}

#[test]
fn index_missing_src_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_cli(&["index", "--src", "nowhere", "--out", "x.fpix"], "", dir.path());
    assert_eq!(run.code, 2);
    assert!(run.err.starts_with("error: "), "{}", run.err);
    assert!(run.err.contains("root not found"));
}

#[test]
fn ask_answers_after_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let script = write_script(
        dir.path(),
        "ask.json",
        &[
            action("retrieve", "eddyDissipation correct"),
            final_answer("See combustion/eddyDissipation.C"),
        ],
    );
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "ask", "Where is the mixing rate?", "--index", index.to_str().unwrap()],
        "",
        dir.path(),
    );
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("See combustion/eddyDissipation.C"));
    assert!(run.out.contains("status: completed (1 tool calls)"), "{}", run.out);
    assert!(run.err.contains("[retrieve]"));
}

#[test]
fn ask_without_answer_reports_max_loops() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let responses: Vec<String> = (0..6).map(|_| action("retrieve", "pyrolysis")).collect();
    let script = write_script(dir.path(), "loop.json", &responses);
    let mock = format!("mock:{}", script.display());
    let run = run_cli_env(
        &["--llm", &mock, "ask", "Q", "--index", index.to_str().unwrap()],
        "",
        dir.path(),
        &[("FOAMPILOT_MAX_LOOPS", "2")],
    );
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("status: max_loops_reached (2 tool calls)"), "{}", run.out);
}

#[test]
fn ask_missing_index_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "s.json", &[final_answer("x")]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "ask", "Q", "--index", "missing.fpix"], "", dir.path());
    assert_eq!(run.code, 2);
    assert!(run.err.starts_with("error: index not found"), "{}", run.err);
}

#[test]
fn configure_burner_resize_reports_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("poolFire");
    copy_dir(&pool_fire(), &case);
    let script = write_script(dir.path(), "burner.json", &burner_resize_responses());
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "--approval", "auto", "configure", "--case", "poolFire", "double the burner size"],
        "",
        dir.path(),
    );
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("status: completed (3 tool calls)"), "{}", run.out);
    assert_eq!(reported_files(&run.out), ["system/snappyHexMeshDict", "system/topoSetDict"], "{}", run.out);
    let topo = std::fs::read_to_string(case.join("system/topoSetDict")).unwrap();
    assert!(topo.contains("box (-0.3 -0.3 -0.001) (0.3 0.3 0.001);"));
}

#[test]
fn configure_missing_case_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "s.json", &[final_answer("x")]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "configure", "--case", "nope", "anything"], "", dir.path());
    assert_eq!(run.code, 2);
    assert!(run.err.contains("case directory not found"), "{}", run.err);
}

#[test]
fn configure_denied_everything_gives_up_with_empty_diff() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("poolFire");
    copy_dir(&pool_fire(), &case);
    let mut responses = burner_resize_responses()[1..3].to_vec();
    responses.extend(["no idea".to_string(), "still no idea".to_string(), "giving up".to_string()]);
    let script = write_script(dir.path(), "denied.json", &responses);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "configure", "--case", "poolFire", "double the burner size"],
        "n\nn\n",
        dir.path(),
    );
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("status: gave_up"), "{}", run.out);
    assert!(run.out.contains("no files changed"));
    assert_eq!(run.err.matches("approval needed").count(), 2);
}

#[test]
fn run_serial_with_stub_solver() {
    let dir = tempfile::tempdir().unwrap();
    let stub = stub_case(dir.path());
    let bashrc = stub.bashrc.display().to_string();
    let script = write_script(
        dir.path(),
        "serial.json",
        &[
            shell(&format!("source {bashrc} && ./mesh.sh")),
            shell(&format!("source {bashrc} && fireFoam > log.fireFoam 2>&1")),
            final_answer("Solver finished."),
        ],
    );
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "--approval", "auto", "run", "serial", "--case", "stubCase", "--bashrc", &bashrc],
        "",
        dir.path(),
    );
    assert_eq!(run.code, 0, "{}", run.err);
    let log = std::fs::read_to_string(stub.case.join("log.fireFoam")).unwrap();
    assert!(log.contains("STUB-SOLVER-SENTINEL"));
    assert!(run.out.contains("status: completed (2 tool calls)"));
}

#[test]
fn run_hpc_submits_once_and_echoes_job_id() {
    let dir = tempfile::tempdir().unwrap();
    let stub = stub_case(dir.path());
    let bashrc = stub.bashrc.display().to_string();
    let script = write_script(
        dir.path(),
        "hpc.json",
        &[
            shell(&format!("source {bashrc} && sbatch job.slurm")),
            final_answer("Submitted."),
        ],
    );
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "--approval", "auto", "run", "hpc", "--case", "stubCase", "--bashrc", &bashrc],
        "",
        dir.path(),
    );
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.lines().any(|l| l == "job id: 4242"), "{}", run.out);
    let calls = std::fs::read_to_string(dir.path().join("sbatch.calls")).unwrap();
    assert_eq!(calls.lines().count(), 1);
}

#[test]
fn run_missing_bashrc_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    stub_case(dir.path());
    let script = write_script(dir.path(), "s.json", &[final_answer("x")]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(
        &["--llm", &mock, "run", "serial", "--case", "stubCase", "--bashrc", "missing.sh"],
        "",
        dir.path(),
    );
    assert_eq!(run.code, 2);
    assert!(run.err.contains("bashrc not found"), "{}", run.err);
}

#[test]
fn chat_echoes_both_turns() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "chat.json", &[final_answer("Hello from the agent.")]);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "chat"], "hi there\n", dir.path());
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("you: hi there"));
    assert!(run.out.contains("assistant: Hello from the agent."));
    assert!(run.out.contains("status: completed"));
}

#[test]
fn config_file_and_env_feed_commands() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    std::fs::write(
        dir.path().join("foampilot.json"),
        format!(r#"{{"index_path": "{}", "policy": {{"max_loops": 1}}}}"#, index.display()),
    )
    .unwrap();
    let responses: Vec<String> = (0..4).map(|_| action("retrieve", "pyrolysis")).collect();
    let script = write_script(dir.path(), "loop.json", &responses);
    let mock = format!("mock:{}", script.display());
    let run = run_cli(&["--llm", &mock, "ask", "Q"], "", dir.path());
    assert!(run.out.contains("status: max_loops_reached (1 tool calls)"), "{}{}", run.out, run.err);

    let run = run_cli_env(&["--llm", &mock, "ask", "Q"], "", dir.path(), &[("FOAMPILOT_MAX_LOOPS", "2")]);
    assert!(run.out.contains("(2 tool calls)"), "{}", run.out);

    let run = run_cli_env(&["--llm", &mock, "ask", "Q"], "", dir.path(), &[("FOAMPILOT_MAX_LOOPS", "zero")]);
    assert_eq!(run.code, 2);
    assert!(run.err.starts_with("error: "));
}

#[test]
fn bad_mock_script_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_cli(&["--llm", "mock:absent.json", "chat"], "", dir.path());
    assert_eq!(run.code, 2);
    assert!(run.err.contains("mock script"));
}
