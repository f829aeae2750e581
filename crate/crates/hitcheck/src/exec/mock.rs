//! Scripted stand-in for a real solver.
//!
//! A [`MockScript`] is an ordered table of rules: a regex matched against
//! the input file's content, plus the behavior to replay (exit code,
//! streams, artifacts to create, an optional sleep). The first matching
//! rule wins; a default behavior applies otherwise. The same table drives
//! both the in-process [`MockBackend`] and the `moose-mock` executable the
//! local backend can spawn, which is what makes cross-backend equivalence
//! testable.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    cap_stream, ArtifactKind, ArtifactRef, BackendKind, ExecError, ExecutionBackend,
    ExecutionRequest, ExecutionResult, DEFAULT_STREAM_CAP, TIMEOUT_EXIT_CODE,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactSpec {
    pub kind: ArtifactKind,
    pub path: String,
}

/// What the mock does when its rule matches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockBehavior {
    #[serde(default)]
    pub exit_code: i32,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub artifacts: Vec<ArtifactSpec>,
    /// How long the "solver" runs before exiting.
    #[serde(default)]
    pub sleep_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    /// Regex matched against the input file content.
    pub pattern: String,
    #[serde(flatten)]
    pub behavior: MockBehavior,
}

/// Ordered rule table plus the fallback behavior (exit 0, silent).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: MockBehavior,
}

impl MockScript {
    pub fn from_json(json: &str) -> Result<Self, ExecError> {
        let script: MockScript =
            serde_json::from_str(json).map_err(|e| ExecError::Script(e.to_string()))?;
        script.compile()?; // fail early on bad regexes
        Ok(script)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExecError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn compile(&self) -> Result<Vec<regex::Regex>, ExecError> {
        self.rules
            .iter()
            .map(|r| regex::Regex::new(&r.pattern).map_err(|e| ExecError::Script(e.to_string())))
            .collect()
    }

    /// First matching rule's behavior, or the default.
    pub fn behavior_for(&self, content: &str) -> Result<&MockBehavior, ExecError> {
        let regexes = self.compile()?;
        for (rule, re) in self.rules.iter().zip(&regexes) {
            if re.is_match(content) {
                return Ok(&rule.behavior);
            }
        }
        Ok(&self.default)
    }
}

/// Create the scripted artifact files under `dir` and return their refs
/// with absolute paths.
pub fn materialize_artifacts(
    specs: &[ArtifactSpec],
    dir: &Path,
) -> Result<Vec<ArtifactRef>, std::io::Error> {
    let mut refs = Vec::with_capacity(specs.len());
    for spec in specs {
        let path = dir.join(&spec.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, b"")?;
        refs.push(ArtifactRef {
            kind: spec.kind,
            path: path.to_string_lossy().into_owned(),
        });
    }
    Ok(refs)
}

/// In-process scripted backend.
pub struct MockBackend {
    script: MockScript,
    stream_cap: usize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            stream_cap: DEFAULT_STREAM_CAP,
        }
    }

    pub fn with_stream_cap(mut self, cap: usize) -> Self {
        self.stream_cap = cap;
        self
    }
}

impl ExecutionBackend for MockBackend {
    fn execute(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        let start = Instant::now();
        if !req.input_path.is_file() {
            return Err(ExecError::InputMissing(req.input_path.clone()));
        }
        std::fs::create_dir_all(&req.working_dir).map_err(ExecError::WorkingDir)?;
        let content = std::fs::read_to_string(&req.input_path)
            .map_err(|e| ExecError::Script(format!("reading input: {e}")))?;
        let behavior = self.script.behavior_for(&content)?.clone();

        let artifacts = materialize_artifacts(&behavior.artifacts, &req.working_dir)
            .map_err(ExecError::WorkingDir)?;

        // Streams are delivered before any timeout, mirroring a child
        // process that prints and flushes before hanging.
        let (stdout, stdout_truncated) = cap_stream(behavior.stdout.as_bytes(), self.stream_cap);
        let (stderr, stderr_truncated) = cap_stream(behavior.stderr.as_bytes(), self.stream_cap);

        let limit = Duration::from_secs_f64(req.time_limit);
        let scripted = Duration::from_millis(behavior.sleep_ms);
        let timed_out = scripted > limit;
        std::thread::sleep(scripted.min(limit));

        Ok(ExecutionResult {
            exit_code: if timed_out {
                TIMEOUT_EXIT_CODE
            } else {
                behavior.exit_code
            },
            timed_out,
            stdout,
            stderr,
            stdout_truncated,
            stderr_truncated,
            artifacts,
            duration: start.elapsed().as_secs_f64(),
            backend: BackendKind::Mock,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }
}

/// Path of the bundled `moose-mock` executable once built by cargo; test
/// helper for wiring the local backend to the mock.
pub fn mock_exe_env_var() -> &'static str {
    "MOOSE_MOCK_SCRIPT"
}

/// Entry point shared with the `moose-mock` binary: read the input named by
/// `-i`, apply the script from the `MOOSE_MOCK_SCRIPT` env var (default
/// behavior when unset), write artifacts into the current directory, print
/// the scripted streams, sleep, and exit with the scripted code.
pub fn run_mock_executable(args: &[String]) -> i32 {
    let mut input: Option<PathBuf> = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "-i" {
            input = it.next().map(PathBuf::from);
        }
    }
    let Some(input) = input else {
        eprintln!("moose-mock: missing -i <input>");
        return 2;
    };
    let content = match std::fs::read_to_string(&input) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("moose-mock: cannot read {}: {e}", input.display());
            return 2;
        }
    };
    let script = match std::env::var(mock_exe_env_var()) {
        Ok(path) => match MockScript::from_path(Path::new(&path)) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("moose-mock: {e}");
                return 2;
            }
        },
        Err(_) => MockScript::default(),
    };
    let behavior = match script.behavior_for(&content) {
        Ok(b) => b.clone(),
        Err(e) => {
            eprintln!("moose-mock: {e}");
            return 2;
        }
    };
    if let Ok(cwd) = std::env::current_dir() {
        let _ = materialize_artifacts(&behavior.artifacts, &cwd);
    }
    use std::io::Write;
    print!("{}", behavior.stdout);
    let _ = std::io::stdout().flush();
    eprint!("{}", behavior.stderr);
    let _ = std::io::stderr().flush();
    if behavior.sleep_ms > 0 {
        // Sleep the full scripted time; a supervising backend enforces the
        // actual limit by killing us.
        std::thread::sleep(Duration::from_millis(behavior.sleep_ms));
    }
    behavior.exit_code
}
