//! JSON-RPC client backend: one in-flight request per call, plain HTTP
//! POST. Callers own any parallelism.

use super::wire::{method_for, RpcRequest, RpcResponse, WireRequest};
use super::{BackendKind, ExecError, ExecutionBackend, ExecutionRequest, ExecutionResult};

pub struct RemoteBackend {
    url: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteBackend {
            url: url.into(),
            agent: ureq::Agent::new_with_defaults(),
        }
    }
}

impl ExecutionBackend for RemoteBackend {
    fn execute(&self, req: &ExecutionRequest) -> Result<ExecutionResult, ExecError> {
        let rpc = RpcRequest {
            jsonrpc: "2.0".to_owned(),
            id: serde_json::Value::from(1),
            method: method_for(req.mode).to_owned(),
            params: WireRequest::from_request(req),
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&rpc)
            .map_err(|e| ExecError::Transport(e.to_string()))?;
        let rpc_response: RpcResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ExecError::Transport(format!("malformed response: {e}")))?;
        if let Some(err) = rpc_response.error {
            return Err(ExecError::Rpc {
                code: err.code,
                message: err.message,
            });
        }
        let wire = rpc_response.result.ok_or_else(|| {
            ExecError::Transport("response carries neither result nor error".to_owned())
        })?;
        Ok(wire.into_result(BackendKind::Remote))
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }
}
