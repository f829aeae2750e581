//! Reference JSON-RPC server: a thin HTTP transport around any
//! [`ExecutionBackend`]. Used by `hitcheck serve` and by the cross-backend
//! equivalence tests.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};

use super::wire::{
    mode_for, RpcError, RpcRequest, RpcResponse, WireResult, RPC_EXECUTION_ERROR,
    RPC_METHOD_NOT_FOUND,
};
use super::ExecutionBackend;

type Shared = Arc<dyn ExecutionBackend>;

async fn rpc_handler(State(backend): State<Shared>, Json(req): Json<RpcRequest>) -> Json<RpcResponse> {
    let id = req.id.clone();
    let reply = |result, error| RpcResponse {
        jsonrpc: "2.0".to_owned(),
        id,
        result,
        error,
    };
    let Some(mode) = mode_for(&req.method) else {
        return Json(reply(
            None,
            Some(RpcError {
                code: RPC_METHOD_NOT_FOUND,
                message: format!("unknown method {:?}", req.method),
                data: None,
            }),
        ));
    };
    let exec_req = req.params.into_request(mode);
    let outcome =
        tokio::task::spawn_blocking(move || backend.execute(&exec_req)).await;
    match outcome {
        Ok(Ok(result)) => Json(reply(Some(WireResult::from_result(&result)), None)),
        Ok(Err(e)) => Json(reply(
            None,
            Some(RpcError {
                code: RPC_EXECUTION_ERROR,
                message: e.to_string(),
                data: None,
            }),
        )),
        Err(join_err) => Json(reply(
            None,
            Some(RpcError {
                code: RPC_EXECUTION_ERROR,
                message: format!("execution task failed: {join_err}"),
                data: None,
            }),
        )),
    }
}

fn router(backend: Shared) -> Router {
    Router::new().route("/rpc", post(rpc_handler)).with_state(backend)
}

/// A running server; dropping it shuts the server down.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    /// Full URL of the RPC endpoint.
    pub fn url(&self) -> String {
        format!("http://{}/rpc", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Start the server on an ephemeral localhost port, in a background thread
/// with its own runtime.
pub fn start(backend: Shared) -> std::io::Result<ServerHandle> {
    start_on(backend, "127.0.0.1:0".parse().unwrap())
}

/// Start the server on a fixed address in a background thread.
pub fn start_on(backend: Shared, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_io()
            .build()
            .expect("tokio runtime");
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = addr_tx.send(Err(e));
                    return;
                }
            };
            let local = listener.local_addr().expect("local addr");
            let _ = addr_tx.send(Ok(local));
            let app = router(backend);
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            });
            if let Err(e) = serve.await {
                eprintln!("server error: {e}");
            }
        });
    });
    let addr = addr_rx
        .recv()
        .map_err(|_| std::io::Error::other("server thread died before binding"))??;
    Ok(ServerHandle {
        addr,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Run the server on the current thread until interrupted (CLI entry).
pub fn serve_blocking(backend: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_io()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}/rpc", listener.local_addr()?);
        axum::serve(listener, router(backend)).await
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::mock::{MockBackend, MockScript};
    use crate::exec::remote::RemoteBackend;
    use crate::exec::{ExecutionMode, ExecutionRequest};

    #[test]
    fn remote_roundtrip_over_reference_server() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("case.i");
        std::fs::write(&input, "[Mesh]\n[]\n").unwrap();
        let script = MockScript::from_json(
            r#"{"rules": [{"pattern": "Mesh", "exit_code": 0, "stdout": "checked"}]}"#,
        )
        .unwrap();
        let server = start(Arc::new(MockBackend::new(script))).unwrap();
        let remote = RemoteBackend::new(server.url());
        let req = ExecutionRequest::new(&input, ExecutionMode::CheckInput, dir.path());
        let result = remote.execute(&req).unwrap();
        assert_eq!(result.exit_code, 0);
        assert_eq!(result.stdout, "checked");
        assert_eq!(result.backend, crate::exec::BackendKind::Remote);
    }

    #[test]
    fn unknown_method_yields_rpc_error() {
        let server = start(Arc::new(MockBackend::new(MockScript::default()))).unwrap();
        let body = serde_json::json!({
            "jsonrpc": "2.0", "id": 7, "method": "moose.dance",
            "params": {"input_path": "x", "time_limit": 1.0, "working_dir": "y"}
        });
        let mut resp = ureq::post(&server.url()).send_json(&body).unwrap();
        let parsed: super::super::wire::RpcResponse = resp.body_mut().read_json().unwrap();
        assert_eq!(parsed.error.unwrap().code, RPC_METHOD_NOT_FOUND);
    }

    #[test]
    fn backend_error_travels_as_rpc_error() {
        let dir = tempfile::tempdir().unwrap();
        let server = start(Arc::new(MockBackend::new(MockScript::default()))).unwrap();
        let remote = RemoteBackend::new(server.url());
        let req = ExecutionRequest::new(
            dir.path().join("missing.i"),
            ExecutionMode::Run,
            dir.path(),
        );
        let err = remote.execute(&req).unwrap_err();
        assert!(matches!(err, crate::exec::ExecError::Rpc { .. }));
    }
}
