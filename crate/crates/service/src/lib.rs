//! HTTP and websocket front end for live fingerspelling sessions.
//!
//! | method | path | body / reply |
//! |---|---|---|
//! | GET | `/v1/alphabet` | ruleset JSON |
//! | POST | `/v1/plan` | `{"text": "আম"}` → spelling plan |
//! | POST | `/v1/eval` | `{"ground_truth": [...], "predictions": [...]}` → evaluation report |
//! | GET, PUT | `/v1/config` | defaults for new sessions |
//! | GET | `/v1/session` | websocket upgrade; wire messages both ways |
//! | GET | `/v1/sessions/{id}` | snapshot of a live session |

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bdspell::metrics::{self, GroundTruth, Prediction};
use bdspell::session::{SessionConfig, SessionManager, DEFAULT_RULESET_ID};
use bdspell::wire::{Inbound, Outbound};
use bdspell::{Planner, RuleSet};
use serde::Deserialize;
use serde_json::json;

/// Shared by every request handler.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    sessions: Mutex<SessionManager>,
    defaults: RwLock<SessionConfig>,
    planner: Planner,
}

impl AppState {
    pub fn new(rules: Arc<RuleSet>, defaults: SessionConfig) -> Self {
        AppState {
            inner: Arc::new(Inner {
                sessions: Mutex::new(SessionManager::with_ruleset(DEFAULT_RULESET_ID, Arc::clone(&rules))),
                defaults: RwLock::new(defaults),
                planner: Planner::new(rules),
            }),
        }
    }

    pub fn defaults(&self) -> SessionConfig {
        *self.inner.defaults.read().unwrap()
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle past the timeout; returns how many went.
    pub fn expire_idle(&self) -> usize {
        self.inner.sessions.lock().unwrap().expire_idle(Instant::now()).len()
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(Arc::new(RuleSet::default_bengali()), SessionConfig::default())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/alphabet", get(alphabet))
        .route("/v1/plan", post(plan))
        .route("/v1/eval", post(eval))
        .route("/v1/config", get(get_config).put(put_config))
        .route("/v1/session", get(open_stream))
        .route("/v1/sessions/{id}", get(snapshot))
        .with_state(state)
}

/// Serves until the process is stopped, reaping idle sessions once a minute.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let reaper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = reaper.expire_idle();
            if n > 0 {
                tracing::info!("expired {n} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state)).await
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn unprocessable(e: impl ToString) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
}

async fn alphabet(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(state.inner.planner.rules().to_json_value())
}

#[derive(Deserialize)]
struct PlanRequest {
    text: String,
}

async fn plan(State(state): State<AppState>, Json(req): Json<PlanRequest>) -> Result<Response, ApiError> {
    let plan = state.inner.planner.plan(&req.text).map_err(unprocessable)?;
    Ok(Json(plan).into_response())
}

#[derive(Deserialize)]
struct EvalRequest {
    ground_truth: Vec<GroundTruth>,
    predictions: Vec<Prediction>,
    #[serde(default)]
    iou_thresholds: Vec<f64>,
    conf_grid: Option<Vec<f64>>,
}

async fn eval(Json(req): Json<EvalRequest>) -> Result<Response, ApiError> {
    let grid = req.conf_grid.unwrap_or_else(metrics::default_conf_grid);
    let report = metrics::evaluate(&req.ground_truth, &req.predictions, &req.iou_thresholds, &grid)
        .map_err(unprocessable)?;
    Ok(Json(report).into_response())
}

async fn get_config(State(state): State<AppState>) -> Json<SessionConfig> {
    Json(state.defaults())
}

async fn put_config(
    State(state): State<AppState>,
    Json(config): Json<SessionConfig>,
) -> Result<Json<SessionConfig>, ApiError> {
    config.confirm.validate().map_err(unprocessable)?;
    if config.snapshot_every == 0 {
        return Err(unprocessable("snapshot_every must be at least 1"));
    }
    *state.inner.defaults.write().unwrap() = config;
    Ok(Json(config))
}

async fn snapshot(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let sessions = state.inner.sessions.lock().unwrap();
    match sessions.get(&id) {
        Some(s) => Ok(Json(s.snapshot()).into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("unknown session {id:?}"))),
    }
}

#[derive(Deserialize)]
struct StreamParams {
    ruleset: Option<String>,
    delta: Option<f64>,
    strategy: Option<String>,
    /// Send an accumulator snapshot on every frame.
    #[serde(default)]
    full_rate: bool,
}

async fn open_stream(
    State(state): State<AppState>,
    Query(params): Query<StreamParams>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let mut config = state.defaults();
    if let Some(delta) = params.delta {
        config.confirm.delta = delta;
    }
    if let Some(name) = &params.strategy {
        config.confirm.strategy = bdspell::wire::parse_strategy(name).map_err(unprocessable)?;
    }
    if params.full_rate {
        config = config.full_rate();
    }
    let ruleset = params.ruleset.as_deref().unwrap_or(DEFAULT_RULESET_ID);
    let id = state
        .inner
        .sessions
        .lock()
        .unwrap()
        .open_session(config, ruleset)
        .map_err(|e| match e {
            bdspell::session::SessionError::UnknownRuleset(_) => ApiError(StatusCode::NOT_FOUND, e.to_string()),
            other => unprocessable(other),
        })?;
    Ok(upgrade.on_upgrade(move |socket| run_stream(socket, state, id, config)))
}

async fn send(socket: &mut WebSocket, message: &Outbound) -> bool {
    socket.send(Message::Text(message.to_json().into())).await.is_ok()
}

async fn run_stream(mut socket: WebSocket, state: AppState, id: String, config: SessionConfig) {
    tracing::debug!("session {id} opened");
    let hello = Outbound::Session {
        id: id.clone(),
        config: config.confirm,
    };
    if send(&mut socket, &hello).await {
        while let Some(Ok(message)) = socket.recv().await {
            let text = match message {
                Message::Text(text) => text,
                Message::Close(_) => break,
                _ => continue,
            };
            let replies = match serde_json::from_str::<Inbound>(&text) {
                Ok(inbound) => match state.inner.sessions.lock().unwrap().handle(&id, inbound) {
                    Ok(replies) => replies,
                    Err(e) => vec![Outbound::Error { reason: e.to_string() }],
                },
                Err(e) => vec![Outbound::Error {
                    reason: format!("bad message: {e}"),
                }],
            };
            let mut open = true;
            for reply in &replies {
                if !send(&mut socket, reply).await {
                    open = false;
                    break;
                }
            }
            if !open {
                break;
            }
        }
    }
    state.inner.sessions.lock().unwrap().close(&id);
    tracing::debug!("session {id} closed");
}
