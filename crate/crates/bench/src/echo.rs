//! Reference server for the external regressor protocol.
//!
//! It answers `POST /v1/fit_predict` without fitting anything, which makes it
//! useful for exercising the client: shapes, failure modes and timeouts.

use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tsfm_core::regress::{FitPredictRequest, FitPredictResponse, FIT_PREDICT_PATH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoMode {
    /// Every row gets `mean(y) + (q − 0.5)·std(y)` at level `q`.
    Mean,
    /// `200` with a body that is not a valid response.
    Malformed,
    /// Like `Mean`, after sleeping.
    Slow(Duration),
    /// Like `Mean` with the levels in reverse order, so quantiles cross.
    Crossing,
    /// `500` on every request.
    Error,
}

impl FromStr for EchoMode {
    type Err = String;
    /// `mean`, `malformed`, `crossing`, `error`, `slow` (1 s) or `slow:<ms>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "malformed" => Ok(Self::Malformed),
            "crossing" => Ok(Self::Crossing),
            "error" => Ok(Self::Error),
            "slow" => Ok(Self::Slow(Duration::from_secs(1))),
            other => match other.strip_prefix("slow:").map(str::parse::<u64>) {
                Some(Ok(ms)) => Ok(Self::Slow(Duration::from_millis(ms))),
                _ => Err(format!("unknown echo mode `{other}`")),
            },
        }
    }
}

#[derive(Clone)]
struct EchoState {
    mode: EchoMode,
    requests: Arc<Mutex<Vec<String>>>,
}

/// Constant quantile rows centred on the training mean.
pub fn mean_response(request: &FitPredictRequest) -> FitPredictResponse {
    let y = &request.y_train;
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let row: Vec<f64> = request.quantile_levels.iter().map(|q| mean + (q - 0.5) * std).collect();
    FitPredictResponse { quantiles: vec![row; request.x_test.len()] }
}

async fn fit_predict(State(state): State<EchoState>, body: String) -> Response {
    state.requests.lock().unwrap_or_else(|e| e.into_inner()).push(body.clone());
    let request: FitPredictRequest = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    };
    match state.mode {
        EchoMode::Mean => Json(mean_response(&request)).into_response(),
        EchoMode::Slow(delay) => {
            tokio::time::sleep(delay).await;
            Json(mean_response(&request)).into_response()
        }
        EchoMode::Crossing => {
            let mut response = mean_response(&request);
            for row in &mut response.quantiles {
                row.reverse();
            }
            Json(response).into_response()
        }
        EchoMode::Malformed => (StatusCode::OK, r#"{"quantiles": [[1.0, "two"]"#).into_response(),
        EchoMode::Error => (StatusCode::INTERNAL_SERVER_ERROR, "echo server error mode").into_response(),
    }
}

fn router(state: EchoState) -> Router {
    Router::new().route(FIT_PREDICT_PATH, post(fit_predict)).with_state(state)
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    mode: EchoMode,
    requests: Arc<Mutex<Vec<String>>>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(EchoState { mode, requests });
    tokio::select! {
        r = axum::serve(listener, app) => r,
        () = shutdown => Ok(()),
    }
}

/// An echo server on a background thread, stopped on drop.
pub struct EchoServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<String>>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl EchoServer {
    /// Binds an ephemeral port on 127.0.0.1.
    pub fn spawn(mode: EchoMode) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let (tx, rx) = oneshot::channel::<()>();
        let shared = Arc::clone(&requests);
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = TcpListener::from_std(std_listener).expect("listener registers with the runtime");
                let stop = async move {
                    let _ = rx.await;
                };
                let _ = serve(listener, mode, shared, stop).await;
            });
        });
        Ok(Self { addr, requests, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to pass as the endpoint.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Raw request bodies received so far.
    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Drop for EchoServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
