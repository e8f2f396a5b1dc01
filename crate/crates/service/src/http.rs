//! axum routes over a shared [`Service`].

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reopt_core::model::load_state;
use reopt_core::scenario::{Scenario, ScenarioMeta};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{Mutex, RwLock};
use tower_http::services::ServeDir;

use crate::planner::PlannerKind;
use crate::session::{PromptOptions, Session, SessionError};
use crate::store::{RestoreReport, Store, StoreError};

#[derive(Clone, Debug, Default)]
pub struct ServiceConfig {
    /// Event store directory; `None` keeps sessions in memory only.
    pub store_dir: Option<PathBuf>,
    /// Built UI bundle served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
    pub planner: PlannerKind,
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("a prompt is already in flight for session `{0}`")]
    Conflict(String),
    #[error("{message}")]
    Unprocessable { message: String, path: Option<String> },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError::Unprocessable { message: message.into(), path: None }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::unprocessable(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ApiError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ApiError::Unprocessable { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable"),
            ApiError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({"error": kind, "message": self.to_string()});
        if let ApiError::Unprocessable { path: Some(p), .. } = &self {
            body["path"] = json!(p);
        }
        (status, Json(body)).into_response()
    }
}

/// Decodes a JSON body, naming the offending field on failure.
fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::Unprocessable {
            message: e.inner().to_string(),
            path: (path != ".").then_some(path),
        }
    })
}

type Slot = Arc<Mutex<Session>>;

pub struct Service {
    config: ServiceConfig,
    store: Option<Store>,
    sessions: RwLock<HashMap<String, Slot>>,
}

impl Service {
    /// Opens the store, if any, and restores every session in it.
    pub fn open(config: ServiceConfig) -> Result<(Arc<Service>, Vec<RestoreReport>), StoreError> {
        let store = config.store_dir.as_ref().map(Store::open).transpose()?;
        let mut sessions = HashMap::new();
        let mut reports = Vec::new();
        if let Some(s) = &store {
            for (session, report) in s.restore_all()? {
                if report.truncated {
                    tracing::warn!(session = %report.session, "dropped an incomplete trailing record");
                }
                sessions.insert(session.id.clone(), Arc::new(Mutex::new(session)));
                reports.push(report);
            }
        }
        let svc = Service { config, store, sessions: RwLock::new(sessions) };
        Ok((Arc::new(svc), reports))
    }

    async fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub async fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().await.keys().cloned().collect();
        ids.sort();
        ids
    }
}

pub fn router(service: Arc<Service>) -> Router {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/prompts", post(post_prompt))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/diff/{v}", get(diff));
    if let Some(dir) = &service.config.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.with_state(service)
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    /// Built-in name or server-side path.
    #[serde(default)]
    scenario: Option<String>,
    /// Inline model state document.
    #[serde(default)]
    state: Option<Value>,
    #[serde(default)]
    name: Option<String>,
}

fn scenario_of(body: CreateBody) -> Result<(String, Scenario), ApiError> {
    match (body.scenario, body.state) {
        (Some(spec), None) => {
            let sc = Scenario::load(&spec).map_err(|e| ApiError::Unprocessable {
                message: e.to_string(),
                path: Some("scenario".into()),
            })?;
            // Absolute paths keep restore independent of the working directory.
            let source = std::fs::canonicalize(&spec)
                .map(|p| p.display().to_string())
                .unwrap_or(spec);
            Ok((source, sc))
        }
        (None, Some(state)) => {
            let state = load_state(&state.to_string()).map_err(|e| ApiError::Unprocessable {
                message: e.to_string(),
                path: Some("state".into()),
            })?;
            let name = body.name.unwrap_or_else(|| "inline".into());
            let sc = Scenario { name, state, meta: ScenarioMeta::default(), framing: None, mock: None, dir: None };
            Ok(("inline".into(), sc))
        }
        _ => Err(ApiError::unprocessable("give exactly one of `scenario` or `state`")),
    }
}

async fn create_session(State(svc): State<Arc<Service>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let body: CreateBody = decode(&body)?;
    let (source, scenario) = scenario_of(body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let svc2 = svc.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let s = Session::create(id, source, scenario)?;
        if let Some(store) = &svc2.store {
            store.persist_created(&s)?;
        }
        Ok(s)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let resp = json!({
        "id": session.id,
        "scenario": session.scenario.name,
        "version": session.version(),
        "baseline": session.latest_solution(),
    });
    svc.sessions.write().await.insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn list_sessions(State(svc): State<Arc<Service>>) -> Json<Value> {
    Json(json!({"sessions": svc.session_ids().await}))
}

async fn get_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = svc.slot(&id).await?;
    let s = slot.lock().await;
    Ok(Json(s.summary()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptBody {
    delta: String,
    #[serde(default)]
    budget: Option<usize>,
    #[serde(default)]
    checks: Vec<reopt_core::agents::PromptCheck>,
    #[serde(default)]
    strategy: Option<reopt_core::toolbox::Strategy>,
    #[serde(default)]
    planner: Option<PlannerKind>,
    #[serde(default)]
    reference_actions: Option<Vec<reopt_core::patch::Patch>>,
}

async fn post_prompt(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let slot = svc.slot(&id).await?;
    let body: PromptBody = decode(&body)?;
    if body.delta.trim().is_empty() {
        return Err(ApiError::Unprocessable { message: "delta is empty".into(), path: Some("delta".into()) });
    }
    // Single writer per session: a second prompt is refused, not queued.
    let mut guard = slot.try_lock_owned().map_err(|_| ApiError::Conflict(id.clone()))?;
    let planner = svc.config.planner;
    let svc2 = svc.clone();
    let event = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let opts = PromptOptions {
            budget: body.budget,
            checks: body.checks,
            strategy: body.strategy,
            planner: body.planner,
            reference_actions: body.reference_actions,
        };
        let event = guard.prompt(&body.delta, &opts, planner)?;
        if let Some(store) = &svc2.store {
            store.persist_event(&guard.id, &event)?;
        }
        Ok(event)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let mut v = serde_json::to_value(&event.outcome).expect("outcomes serialize");
    v["seq"] = json!(event.seq);
    v["from_version"] = json!(event.from_version);
    v["wall_time"] = json!(event.wall_time);
    if let Some(score) = &event.score {
        v["score"] = serde_json::to_value(score).expect("scores serialize");
    }
    Ok(Json(v))
}

async fn history(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = svc.slot(&id).await?;
    let s = slot.lock().await;
    Ok(Json(json!({"id": s.id, "events": s.events})))
}

async fn diff(State(svc): State<Arc<Service>>, Path((id, v)): Path<(String, String)>) -> Result<Json<Value>, ApiError> {
    let slot = svc.slot(&id).await?;
    let v: u64 = v
        .parse()
        .map_err(|_| ApiError::Unprocessable { message: format!("`{v}` is not a version"), path: Some("v".into()) })?;
    let s = slot.lock().await;
    let d = s.diff(v).ok_or_else(|| ApiError::NotFound(format!("{id} version {v}")))?;
    let mut out = serde_json::to_value(&d).expect("diffs serialize");
    out["solution"] = json!(s.solutions.get(&v));
    Ok(Json(out))
}
