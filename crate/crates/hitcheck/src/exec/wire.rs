//! JSON-RPC 2.0 wire contract for remote execution.
//!
//! One HTTP POST per call. Methods are `moose.check_input`,
//! `moose.mesh_only` and `moose.run_input`; params mirror
//! [`ExecutionRequest`] (the mode is carried by the method name) and the
//! result mirrors [`ExecutionResult`] with base64-encoded stream payloads.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ArtifactRef, BackendKind, ExecutionMode, ExecutionRequest, ExecutionResult};

pub const METHOD_CHECK_INPUT: &str = "moose.check_input";
pub const METHOD_MESH_ONLY: &str = "moose.mesh_only";
pub const METHOD_RUN_INPUT: &str = "moose.run_input";

pub fn method_for(mode: ExecutionMode) -> &'static str {
    match mode {
        ExecutionMode::CheckInput => METHOD_CHECK_INPUT,
        ExecutionMode::MeshOnly => METHOD_MESH_ONLY,
        ExecutionMode::Run => METHOD_RUN_INPUT,
    }
}

pub fn mode_for(method: &str) -> Option<ExecutionMode> {
    match method {
        METHOD_CHECK_INPUT => Some(ExecutionMode::CheckInput),
        METHOD_MESH_ONLY => Some(ExecutionMode::MeshOnly),
        METHOD_RUN_INPUT => Some(ExecutionMode::Run),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcRequest {
    pub jsonrpc: String,
    pub id: serde_json::Value,
    pub method: String,
    pub params: WireRequest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcResponse {
    pub jsonrpc: String,
    pub id: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<WireResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
}

pub const RPC_METHOD_NOT_FOUND: i64 = -32601;
pub const RPC_INVALID_PARAMS: i64 = -32602;
pub const RPC_EXECUTION_ERROR: i64 = -32000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub input_path: String,
    pub time_limit: f64,
    pub working_dir: String,
    #[serde(default)]
    pub extra_args: Vec<String>,
}

impl WireRequest {
    pub fn from_request(req: &ExecutionRequest) -> Self {
        WireRequest {
            input_path: req.input_path.to_string_lossy().into_owned(),
            time_limit: req.time_limit,
            working_dir: req.working_dir.to_string_lossy().into_owned(),
            extra_args: req.extra_args.clone(),
        }
    }

    pub fn into_request(self, mode: ExecutionMode) -> ExecutionRequest {
        ExecutionRequest {
            input_path: self.input_path.into(),
            mode,
            time_limit: self.time_limit,
            working_dir: self.working_dir.into(),
            extra_args: self.extra_args,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResult {
    pub exit_code: i32,
    pub timed_out: bool,
    pub stdout_b64: String,
    pub stderr_b64: String,
    pub stdout_truncated: bool,
    pub stderr_truncated: bool,
    pub artifacts: Vec<ArtifactRef>,
    pub duration: f64,
    pub backend: BackendKind,
}

impl WireResult {
    pub fn from_result(result: &ExecutionResult) -> Self {
        WireResult {
            exit_code: result.exit_code,
            timed_out: result.timed_out,
            stdout_b64: BASE64.encode(result.stdout.as_bytes()),
            stderr_b64: BASE64.encode(result.stderr.as_bytes()),
            stdout_truncated: result.stdout_truncated,
            stderr_truncated: result.stderr_truncated,
            artifacts: result.artifacts.clone(),
            duration: result.duration,
            backend: result.backend,
        }
    }

    /// Decode into a result tagged with the caller's backend kind (the
    /// remote client reports `remote` regardless of what ran server-side).
    pub fn into_result(self, backend: BackendKind) -> ExecutionResult {
        let decode = |b64: &str| {
            BASE64
                .decode(b64)
                .map(|bytes| String::from_utf8_lossy(&bytes).into_owned())
                .unwrap_or_default()
        };
        ExecutionResult {
            exit_code: self.exit_code,
            timed_out: self.timed_out,
            stdout: decode(&self.stdout_b64),
            stderr: decode(&self.stderr_b64),
            stdout_truncated: self.stdout_truncated,
            stderr_truncated: self.stderr_truncated,
            artifacts: self.artifacts,
            duration: self.duration,
            backend,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_roundtrips_through_wire_form() {
        let result = ExecutionResult {
            exit_code: 2,
            timed_out: false,
            stdout: "solve: 42\n".into(),
            stderr: "Aborting: divergence £€\n".into(),
            stdout_truncated: false,
            stderr_truncated: true,
            artifacts: vec![ArtifactRef {
                kind: super::super::ArtifactKind::Mesh,
                path: "out.e".into(),
            }],
            duration: 0.5,
            backend: BackendKind::Mock,
        };
        let wire = WireResult::from_result(&result);
        let json = serde_json::to_string(&wire).unwrap();
        let parsed: WireResult = serde_json::from_str(&json).unwrap();
        let back = parsed.into_result(BackendKind::Mock);
        assert_eq!(back, result);
    }

    #[test]
    fn method_mapping_is_total_and_inverse() {
        for mode in [
            ExecutionMode::CheckInput,
            ExecutionMode::MeshOnly,
            ExecutionMode::Run,
        ] {
            assert_eq!(mode_for(method_for(mode)), Some(mode));
        }
        assert_eq!(mode_for("moose.dance"), None);
    }
}
