//! The process-spawn seam shared by the shell and script tools.

use std::io::{self, Read};
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandSpec {
    pub program: String,
    pub args: Vec<String>,
    pub workdir: PathBuf,
    pub timeout: Duration,
}

impl CommandSpec {
    /// `command` run through `bash -c`.
    pub fn shell(command: &str, workdir: impl Into<PathBuf>, timeout: Duration) -> Self {
        Self {
            program: "bash".to_string(),
            args: vec!["-c".to_string(), command.to_string()],
            workdir: workdir.into(),
            timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutput {
    /// `None` when killed by a signal.
    pub exit_code: Option<i32>,
    /// Interleaved stdout and stderr.
    pub output: String,
    pub timed_out: bool,
    pub duration: Duration,
}

pub trait ProcessSpawner: Send + Sync {
    fn spawn(&self, spec: &CommandSpec) -> io::Result<ProcessOutput>;
}

/// Runs commands as real child processes in their own process group, so a
/// timeout kills the whole tree.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemSpawner;

impl ProcessSpawner for SystemSpawner {
    fn spawn(&self, spec: &CommandSpec) -> io::Result<ProcessOutput> {
        let started = Instant::now();
        let (mut reader, writer) = io::pipe()?;
        let mut child = {
            let mut cmd = Command::new(&spec.program);
            cmd.args(&spec.args)
                .current_dir(&spec.workdir)
                .stdin(Stdio::null())
                .stdout(writer.try_clone()?)
                .stderr(writer)
                .process_group(0);
            cmd.spawn()?
            // cmd drops here, closing the parent's copies of the write end
        };

        let collector = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = reader.read_to_end(&mut buf);
            buf
        });

        let (status, timed_out) = match child.wait_timeout(spec.timeout)? {
            Some(status) => (status, false),
            None => {
                // SAFETY: killpg on the group we created for this child.
                unsafe {
                    libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
                }
                (child.wait()?, true)
            }
        };
        let bytes = collector.join().unwrap_or_default();
        Ok(ProcessOutput {
            exit_code: status.code(),
            output: String::from_utf8_lossy(&bytes).into_owned(),
            timed_out,
            duration: started.elapsed(),
        })
    }
}
