//! Pluggable execution backends with identical validate / mesh-only / run
//! semantics.
//!
//! Three backends implement the same [`ExecutionBackend`] contract:
//!
//! - [`local::LocalBackend`] spawns a configured executable directly;
//! - [`remote::RemoteBackend`] delegates over JSON-RPC 2.0 to a service
//!   speaking the wire protocol in [`wire`] (a reference server lives in
//!   [`server`]);
//! - [`mock::MockBackend`] replays scripted behaviors keyed by regex over
//!   the input content — the test stand-in for a real solver.
//!
//! Switching backends changes only the binding, not the result contract:
//! exit status, captured (and possibly truncated) streams, timeout flag,
//! and artifact references all behave identically.

pub mod local;
pub mod mock;
pub mod remote;
pub mod server;
pub mod wire;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exit code reported when a run is killed at its time limit.
pub const TIMEOUT_EXIT_CODE: i32 = 124;

/// Default per-stream capture cap (bytes); anything beyond is discarded and
/// the stream is flagged as truncated.
pub const DEFAULT_STREAM_CAP: usize = 1 << 20;

pub const DEFAULT_TIME_LIMIT: f64 = 60.0;

/// Extra time allowed for kill-and-reap after the limit expires.
pub const GRACE_PERIOD: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    CheckInput,
    MeshOnly,
    Run,
}

impl ExecutionMode {
    /// The flag appended to the executable invocation; a full run has none.
    pub fn cli_flag(&self) -> Option<&'static str> {
        match self {
            ExecutionMode::CheckInput => Some("--check-input"),
            ExecutionMode::MeshOnly => Some("--mesh-only"),
            ExecutionMode::Run => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRequest {
    pub input_path: PathBuf,
    pub mode: ExecutionMode,
    /// Wall-clock limit in seconds; must be positive.
    pub time_limit: f64,
    pub working_dir: PathBuf,
    pub extra_args: Vec<String>,
}

impl ExecutionRequest {
    pub fn new(
        input_path: impl Into<PathBuf>,
        mode: ExecutionMode,
        working_dir: impl Into<PathBuf>,
    ) -> Self {
        ExecutionRequest {
            input_path: input_path.into(),
            mode,
            time_limit: DEFAULT_TIME_LIMIT,
            working_dir: working_dir.into(),
            extra_args: Vec::new(),
        }
    }

    pub fn with_mode(&self, mode: ExecutionMode) -> Self {
        ExecutionRequest {
            mode,
            ..self.clone()
        }
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Log,
    OutputFile,
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub kind: ArtifactKind,
    pub path: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Local,
    Remote,
    Mock,
}

/// Structured outcome of one backend call. `timed_out` implies the exit
/// code is the kill code ([`TIMEOUT_EXIT_CODE`], nonzero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub exit_code: i32,
    pub timed_out: bool,
    pub stdout: String,
    pub stderr: String,
    pub stdout_truncated: bool,
    pub stderr_truncated: bool,
    pub artifacts: Vec<ArtifactRef>,
    /// Seconds of wall-clock time the call took.
    pub duration: f64,
    pub backend: BackendKind,
}

impl ExecutionResult {
    /// The pass gate used everywhere downstream: exit code zero.
    pub fn passed(&self) -> bool {
        self.exit_code == 0
    }

    pub fn truncated(&self) -> bool {
        self.stdout_truncated || self.stderr_truncated
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("input file not found: {0}")]
    InputMissing(PathBuf),
    #[error("no executable configured (set `moose_exe`)")]
    ExecutableNotConfigured,
    #[error("remote backend needs `remote_url`")]
    RemoteUrlNotConfigured,
    #[error("failed to spawn {exe}: {source}")]
    Spawn {
        exe: String,
        source: std::io::Error,
    },
    #[error("working directory: {0}")]
    WorkingDir(std::io::Error),
    #[error("transport: {0}")]
    Transport(String),
    #[error("remote error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("mock script: {0}")]
    Script(String),
}

/// The backend contract: identical tool semantics regardless of where the
/// execution happens. Implementations must be safe to share across threads;
/// each call is independent.
pub trait ExecutionBackend: Send + Sync {
    fn execute(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError>;

    fn kind(&self) -> BackendKind;

    /// Schema and setup validation (`--check-input`).
    fn check_input(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        self.execute(&req.with_mode(ExecutionMode::CheckInput))
    }

    /// Mesh-only run to isolate geometry problems.
    fn mesh_only(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        self.execute(&req.with_mode(ExecutionMode::MeshOnly))
    }

    /// Full run; pass/fail downstream is exactly `exit_code == 0`.
    fn run_input(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        self.execute(&req.with_mode(ExecutionMode::Run))
    }
}

/// Truncate a raw stream at `cap` bytes. Used identically by every backend
/// so capped output is byte-for-byte comparable across them.
pub(crate) fn cap_stream(bytes: &[u8], cap: usize) -> (String, bool) {
    if bytes.len() > cap {
        (String::from_utf8_lossy(&bytes[..cap]).into_owned(), true)
    } else {
        (String::from_utf8_lossy(bytes).into_owned(), false)
    }
}

/// Classify an artifact file by extension.
pub(crate) fn classify_artifact(path: &Path) -> ArtifactKind {
    match path.extension().and_then(|e| e.to_str()) {
        Some("e") | Some("exo") | Some("msh") | Some("gmv") => ArtifactKind::Mesh,
        Some("log") => ArtifactKind::Log,
        _ => ArtifactKind::OutputFile,
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Local,
    Remote,
    Mock,
}

/// Executor settings, read from TOML. Executable discovery is explicit:
/// only `moose_exe` is consulted, never `PATH`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendChoice,
    #[serde(default)]
    pub moose_exe: Option<PathBuf>,
    #[serde(default)]
    pub remote_url: Option<String>,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default = "default_stream_cap")]
    pub stream_cap: usize,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

fn default_backend() -> BackendChoice {
    BackendChoice::Mock
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT
}

fn default_stream_cap() -> usize {
    DEFAULT_STREAM_CAP
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            backend: BackendChoice::Mock,
            moose_exe: None,
            remote_url: None,
            time_limit: DEFAULT_TIME_LIMIT,
            stream_cap: DEFAULT_STREAM_CAP,
            mock_script: None,
        }
    }
}

impl ExecConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self, ExecError> {
        let text = std::fs::read_to_string(path).map_err(ExecError::WorkingDir)?;
        Self::from_toml(&text).map_err(|e| ExecError::Script(e.to_string()))
    }

    /// Instantiate the configured backend.
    pub fn build_backend(&self) -> Result<Box<dyn ExecutionBackend>, ExecError> {
        match self.backend {
            BackendChoice::Local => {
                let exe = self
                    .moose_exe
                    .clone()
                    .ok_or(ExecError::ExecutableNotConfigured)?;
                Ok(Box::new(
                    local::LocalBackend::new(exe).with_stream_cap(self.stream_cap),
                ))
            }
            BackendChoice::Remote => {
                let url = self
                    .remote_url
                    .clone()
                    .ok_or(ExecError::RemoteUrlNotConfigured)?;
                Ok(Box::new(remote::RemoteBackend::new(url)))
            }
            BackendChoice::Mock => {
                let script = match &self.mock_script {
                    Some(path) => mock::MockScript::from_path(path)?,
                    None => mock::MockScript::default(),
                };
                Ok(Box::new(
                    mock::MockBackend::new(script).with_stream_cap(self.stream_cap),
                ))
            }
        }
    }
}
