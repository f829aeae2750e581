//! Local subprocess backend: runs the configured executable with
//! `-i <input>` plus the mode flag, captures both streams up to the cap,
//! and enforces the wall-clock limit by killing the child.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant, SystemTime};

use wait_timeout::ChildExt;

use super::{
    cap_stream, classify_artifact, ArtifactRef, BackendKind, ExecError, ExecutionBackend,
    ExecutionRequest, ExecutionResult, DEFAULT_STREAM_CAP, GRACE_PERIOD, TIMEOUT_EXIT_CODE,
};

pub struct LocalBackend {
    exe: PathBuf,
    stream_cap: usize,
    grace: Duration,
}

impl LocalBackend {
    pub fn new(exe: impl Into<PathBuf>) -> Self {
        LocalBackend {
            exe: exe.into(),
            stream_cap: DEFAULT_STREAM_CAP,
            grace: GRACE_PERIOD,
        }
    }

    pub fn with_stream_cap(mut self, cap: usize) -> Self {
        self.stream_cap = cap;
        self
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }
}

/// Read a pipe to EOF, keeping at most `cap` bytes. The tail is drained and
/// discarded so the child never blocks on a full pipe.
fn read_capped<R: Read>(mut reader: R, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut overflowed = false;
    let mut buf = [0u8; 64 * 1024];
    loop {
        match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                if kept.len() < cap + 1 {
                    let take = (cap + 1 - kept.len()).min(n);
                    kept.extend_from_slice(&buf[..take]);
                }
                if kept.len() > cap {
                    overflowed = true;
                }
            }
            Err(_) => break,
        }
    }
    (kept, overflowed)
}

type Snapshot = HashMap<PathBuf, SystemTime>;

fn snapshot_dir(dir: &Path) -> Snapshot {
    let mut snap = HashMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            if let Ok(meta) = entry.metadata() {
                if meta.is_file() {
                    snap.insert(entry.path(), meta.modified().unwrap_or(SystemTime::UNIX_EPOCH));
                }
            }
        }
    }
    snap
}

/// Files created or modified during the run, excluding the input itself.
fn collect_artifacts(dir: &Path, before: &Snapshot, input: &Path) -> Vec<ArtifactRef> {
    let mut found: Vec<ArtifactRef> = Vec::new();
    let after = snapshot_dir(dir);
    let mut paths: Vec<&PathBuf> = after.keys().collect();
    paths.sort();
    for path in paths {
        if path == input {
            continue;
        }
        let changed = match before.get(path) {
            None => true,
            Some(old) => after[path] > *old,
        };
        if changed {
            found.push(ArtifactRef {
                kind: classify_artifact(path),
                path: path.to_string_lossy().into_owned(),
            });
        }
    }
    found
}

impl ExecutionBackend for LocalBackend {
    fn execute(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        if !req.input_path.is_file() {
            return Err(ExecError::InputMissing(req.input_path.clone()));
        }
        if !self.exe.is_file() {
            return Err(ExecError::ExecutableNotConfigured);
        }
        std::fs::create_dir_all(&req.working_dir).map_err(ExecError::WorkingDir)?;
        let before = snapshot_dir(&req.working_dir);

        let mut cmd = Command::new(&self.exe);
        cmd.arg("-i").arg(&req.input_path);
        if let Some(flag) = req.mode.cli_flag() {
            cmd.arg(flag);
        }
        cmd.args(&req.extra_args)
            .current_dir(&req.working_dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        // Own process group, so a timeout kill reaps helper processes the
        // solver may have spawned (otherwise they keep the pipes open).
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }

        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|source| ExecError::Spawn {
            exe: self.exe.display().to_string(),
            source,
        })?;

        let cap = self.stream_cap;
        let stdout_pipe = child.stdout.take().expect("stdout piped");
        let stderr_pipe = child.stderr.take().expect("stderr piped");
        let out_thread = std::thread::spawn(move || read_capped(stdout_pipe, cap));
        let err_thread = std::thread::spawn(move || read_capped(stderr_pipe, cap));

        let limit = Duration::from_secs_f64(req.time_limit.max(0.001));
        let (timed_out, status) = match child.wait_timeout(limit).map_err(ExecError::WorkingDir)? {
            Some(status) => (false, Some(status)),
            None => {
                kill_process_group(&mut child);
                let status = child.wait_timeout(self.grace).ok().flatten();
                (true, status)
            }
        };

        let (stdout_bytes, _) = out_thread.join().unwrap_or_default();
        let (stderr_bytes, _) = err_thread.join().unwrap_or_default();
        let (stdout, stdout_truncated) = cap_stream(&stdout_bytes, cap);
        let (stderr, stderr_truncated) = cap_stream(&stderr_bytes, cap);

        let exit_code = if timed_out {
            TIMEOUT_EXIT_CODE
        } else {
            status_code(status)
        };

        Ok(ExecutionResult {
            exit_code,
            timed_out,
            stdout,
            stderr,
            stdout_truncated,
            stderr_truncated,
            artifacts: collect_artifacts(&req.working_dir, &before, &req.input_path),
            duration: start.elapsed().as_secs_f64(),
            backend: BackendKind::Local,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Local
    }
}

fn kill_process_group(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        let pgid = child.id() as i32;
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

fn status_code(status: Option<std::process::ExitStatus>) -> i32 {
    let Some(status) = status else {
        return TIMEOUT_EXIT_CODE;
    };
    if let Some(code) = status.code() {
        return code;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return 128 + sig;
        }
    }
    -1
}
