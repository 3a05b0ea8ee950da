use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use ftc_core::error::ModelError;
use ftc_core::modelio::mock::MockBackend;
use ftc_core::modelio::protocol::{
    ClassifyRequest, ClassifyResponse, Classifier, ErrorEnvelope, GenerateRequest, GenerateResponse, Generator,
};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::{CLASSIFY_PATH, GENERATE_PATH};

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorEnvelope::new(code, message))).into_response()
}

fn model_error(e: ModelError) -> Response {
    match e {
        ModelError::InvalidRequest(m) => error(StatusCode::BAD_REQUEST, "invalid_request", m),
        ModelError::Protocol { code, message, .. } => error(StatusCode::UNPROCESSABLE_ENTITY, &code, message),
        ModelError::Transport(m) => error(StatusCode::BAD_GATEWAY, "backend_unavailable", m),
    }
}

fn malformed(e: serde_json::Error) -> Response {
    error(StatusCode::BAD_REQUEST, "malformed_json", e.to_string())
}

async fn classify(State(backend): State<Arc<MockBackend>>, body: Bytes) -> Response {
    let request: ClassifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return malformed(e),
    };
    match request.validate().and_then(|_| backend.classify(&request)) {
        Ok(probs) => Json(ClassifyResponse { probs }).into_response(),
        Err(e) => model_error(e),
    }
}

async fn generate(State(backend): State<Arc<MockBackend>>, body: Bytes) -> Response {
    let request: GenerateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return malformed(e),
    };
    match backend.generate(&request) {
        Ok(text) => Json(GenerateResponse { text }).into_response(),
        Err(e) => model_error(e),
    }
}

pub fn router(backend: Arc<MockBackend>) -> Router {
    Router::new()
        .route(CLASSIFY_PATH, post(classify))
        .route(GENERATE_PATH, post(generate))
        .method_not_allowed_fallback(|| async {
            error(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "use POST")
        })
        .fallback(|uri: axum::http::Uri| async move {
            error(StatusCode::NOT_FOUND, "not_found", format!("no endpoint at {}", uri.path()))
        })
        .with_state(backend)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    backend: MockBackend,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(Arc::new(backend))).with_graceful_shutdown(shutdown).await
}

/// A mock server on its own runtime thread; stopped on drop.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(backend: MockBackend, addr: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(backend, listener, async {
                let _ = rx.await;
            }))
        });
        Ok(MockServer { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.halt()
    }

    /// Blocks until the server exits on its own.
    pub fn join(mut self) -> std::io::Result<()> {
        let _keep = self.shutdown.take();
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn halt(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        let _ = self.halt();
    }
}
