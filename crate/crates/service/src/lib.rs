//! HTTP API over the survey engine.
//!
//! Respondents see only the session id, status, exchange count and the next
//! question. Policy telemetry lives behind the token-gated debug endpoint.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, TryLockError};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use survey_core::actions::ActionType;
use survey_core::engine::{ConversationSession, Engine, PolicyKind, SessionConfig, SessionStatus};
use survey_core::policy::EpsilonSchedule;
use survey_core::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const ADMIN_HEADER: &str = "x-admin-token";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Required by the debug endpoint; when unset debug access is refused.
    pub admin_token: Option<String>,
    pub cors_origin: Option<String>,
    /// Finished sessions are written here as `<id>.jsonl`.
    pub transcript_dir: Option<PathBuf>,
    /// Settings for sessions created without overrides.
    pub defaults: SessionConfig,
}

struct Entry {
    session: ConversationSession,
    /// Responses already sent, by idempotency key.
    replies: HashMap<String, (StatusCode, Value)>,
    persisted: bool,
}

type Slot = Arc<Mutex<Entry>>;

pub struct AppState {
    engine: Option<Engine>,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Slot>>,
    /// Session ids by the idempotency key of the create request.
    created: Mutex<HashMap<String, String>>,
}

impl AppState {
    /// `engine` is `None` when no prior table could be loaded; session
    /// creation then answers 503.
    pub fn new(engine: Option<Engine>, config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            engine,
            config,
            sessions: Mutex::new(HashMap::new()),
            created: Mutex::new(HashMap::new()),
        })
    }

    fn slot(&self, id: &str) -> Result<Slot, ApiError> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}"))
    }

    fn body(&self) -> Value {
        json!({ "error": self.message, "code": self.code })
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::InvalidInput(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            Error::SessionClosed { .. } => (StatusCode::CONFLICT, "session_closed"),
            Error::Llm(_) | Error::Scoring { .. } => (StatusCode::BAD_GATEWAY, "upstream_failure"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

/// What a respondent may see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: SessionStatus,
    pub t: u32,
    pub horizon: u32,
    /// The question awaiting an answer; `null` once the session is over.
    pub question: Option<String>,
}

fn view(s: &ConversationSession) -> SessionView {
    SessionView {
        session_id: s.id().to_string(),
        status: s.status(),
        t: s.t(),
        horizon: s.config().horizon,
        question: s.current_question().map(str::to_string),
    }
}

fn named_row(row: [f64; 5]) -> Value {
    let mut m = serde_json::Map::new();
    for a in ActionType::ALL {
        m.insert(a.to_string(), json!(row[a.index()]));
    }
    Value::Object(m)
}

fn admin_view(s: &ConversationSession) -> Value {
    let last = s.exchanges().last();
    let live_row = match (s.table(), last) {
        (Some(table), Some(e)) => Some(table.row(e.state)),
        _ => last.and_then(|e| e.ev_row),
    };
    json!({
        "session_id": s.id(),
        "status": s.status(),
        "t": s.t(),
        "horizon": s.config().horizon,
        "question": s.current_question(),
        "config": s.config(),
        "state": last.map(|e| e.state),
        "last_action": last.and_then(|e| e.next_action),
        "epsilon_effective": last.and_then(|e| e.epsilon),
        "explored": last.and_then(|e| e.explored),
        "lsde": last.map(|e| e.score),
        "ev_row": live_row.map(named_row),
        "epsilon_series": s.exchanges().iter().map(|e| e.epsilon).collect::<Vec<_>>(),
        "ev_deltas": s.exchanges().iter().map(|e| e.ev_update.map(|u| json!({
            "t": e.t, "state": u.state, "action": u.action, "before": u.before, "after": u.after, "delta": u.after - u.before,
        }))).collect::<Vec<_>>(),
        "exchanges": s.exchanges(),
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EpsilonInput {
    Number(f64),
    Text(String),
    Schedule(EpsilonSchedule),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    horizon: Option<u32>,
    epsilon: Option<EpsilonInput>,
    alpha: Option<f64>,
    seed: Option<u64>,
    /// `adaptive` (default) or `baseline`.
    policy: Option<String>,
    role: Option<String>,
    topic: Option<String>,
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| {
        let status = if e.is_data() { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::BAD_REQUEST };
        ApiError::new(status, "bad_request", format!("request body: {e}"))
    })
}

fn session_config(req: CreateRequest, defaults: &SessionConfig, id: &uuid::Uuid) -> Result<SessionConfig, ApiError> {
    let mut c = defaults.clone();
    if let Some(h) = req.horizon {
        c.horizon = h;
    }
    if let Some(e) = req.epsilon {
        c.schedule = match e {
            EpsilonInput::Number(x) => EpsilonSchedule::fixed(x)?,
            EpsilonInput::Text(s) => s.parse()?,
            EpsilonInput::Schedule(s) => s,
        };
    }
    if let Some(a) = req.alpha {
        c.alpha = a;
    }
    c.policy = match req.policy.as_deref() {
        None | Some("adaptive") => PolicyKind::Adaptive,
        Some("baseline") => PolicyKind::historical_baseline(),
        Some(other) => return Err(Error::InvalidInput(format!("unknown policy {other:?}")).into()),
    };
    // without an explicit seed every session draws its own from the id
    c.seed = req.seed.unwrap_or_else(|| id.as_u64_pair().0);
    c.role = req.role.or(c.role);
    c.topic = req.topic.or(c.topic);
    c.validate()?;
    Ok(c)
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string)
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Some(engine) = &app.engine else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_prior", "no prior EV table is loaded"));
    };
    let req: CreateRequest = parse_json(&body)?;
    let key = idempotency_key(&headers);
    let mut created = lock(&app.created);
    if let Some(id) = key.as_ref().and_then(|k| created.get(k)) {
        let slot = app.slot(id)?;
        let entry = lock(&slot);
        return Ok((StatusCode::OK, Json(view(&entry.session))));
    }
    let id = uuid::Uuid::new_v4();
    let config = session_config(req, &app.config.defaults, &id)?;
    let session = engine.start_session(id.to_string(), config)?;
    let v = view(&session);
    lock(&app.sessions).insert(
        v.session_id.clone(),
        Arc::new(Mutex::new(Entry { session, replies: HashMap::new(), persisted: false })),
    );
    if let Some(k) = key {
        created.insert(k, v.session_id.clone());
    }
    tracing::info!(session = %v.session_id, "session created");
    Ok((StatusCode::CREATED, Json(v)))
}

#[derive(Debug, Default, Deserialize)]
struct MessageRequest {
    #[serde(default)]
    text: String,
}

fn persist(app: &AppState, engine: &Engine, entry: &mut Entry) {
    if entry.persisted {
        return;
    }
    let transcript = engine.end_session(&mut entry.session);
    entry.persisted = true;
    if let Some(dir) = &app.config.transcript_dir {
        let path = dir.join(format!("{}.jsonl", transcript.session_id));
        let written = std::fs::create_dir_all(dir).map_err(|e| e.to_string()).and_then(|_| {
            transcript.write_jsonl(&path).map_err(|e| e.to_string())
        });
        if let Err(e) = written {
            tracing::error!(session = %transcript.session_id, error = %e, "could not write transcript");
        }
    }
}

fn step_blocking(app: &AppState, slot: &Slot, text: &str, key: Option<String>) -> Result<(StatusCode, Value), ApiError> {
    let engine = app.engine.as_ref().expect("sessions exist only with an engine");
    let mut entry = match slot.try_lock() {
        Ok(g) => g,
        Err(TryLockError::Poisoned(p)) => p.into_inner(),
        Err(TryLockError::WouldBlock) => {
            return Err(ApiError::new(StatusCode::CONFLICT, "busy", "another message for this session is being processed"))
        }
    };
    if let Some(cached) = key.as_ref().and_then(|k| entry.replies.get(k)) {
        return Ok(cached.clone());
    }
    if entry.session.status() != SessionStatus::Active {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_closed",
            format!("session is {}", entry.session.status()),
        ));
    }
    engine.step(&mut entry.session, text)?;
    let body = serde_json::to_value(view(&entry.session)).expect("view serializes");
    if entry.session.status() == SessionStatus::Completed {
        persist(app, engine, &mut entry);
    }
    if let Some(k) = key {
        entry.replies.insert(k, (StatusCode::OK, body.clone()));
    }
    Ok((StatusCode::OK, body))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let slot = app.slot(&id)?;
    let req: MessageRequest = parse_json(&body)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "message text is empty"));
    }
    let key = idempotency_key(&headers);
    let app2 = app.clone();
    let (status, value) = tokio::task::spawn_blocking(move || step_blocking(&app2, &slot, &req.text, key))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((status, Json(value)))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let slot = app.slot(&id)?;
    let entry = lock(&slot);
    Ok(Json(view(&entry.session)))
}

fn check_admin(app: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let given = headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok()).or_else(|| {
        headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "))
    });
    match (given, app.config.admin_token.as_deref()) {
        (None, _) => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin token required")),
        (Some(g), Some(t)) if g == t => Ok(()),
        _ => Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "admin token rejected")),
    }
}

async fn debug_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<Value>, ApiError> {
    check_admin(&app, &headers)?;
    let slot = app.slot(&id)?;
    let entry = lock(&slot);
    Ok(Json(admin_view(&entry.session)))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let slot = app.slot(&id)?;
    let app2 = app.clone();
    let v = tokio::task::spawn_blocking(move || {
        let mut entry = lock(&slot);
        let engine = app2.engine.as_ref().expect("sessions exist only with an engine");
        persist(&app2, engine, &mut entry);
        view(&entry.session)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    tracing::info!(session = %id, status = %v.status, "session ended");
    Ok(Json(v))
}

async fn healthz(State(app): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "prior_loaded": app.engine.is_some(),
        "sessions": lock(&app.sessions).len(),
    }))
}

pub fn router(app: Arc<AppState>) -> Router {
    let mut r = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/debug", get(debug_session));
    if let Some(origin) = &app.config.cors_origin {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            match HeaderValue::from_str(origin) {
                Ok(v) => AllowOrigin::exact(v),
                Err(_) => {
                    tracing::warn!(origin, "ignoring malformed CORS origin");
                    AllowOrigin::list([])
                }
            }
        };
        r = r.layer(
            CorsLayer::new()
                .allow_origin(allow)
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([
                    header::CONTENT_TYPE,
                    header::AUTHORIZATION,
                    header::HeaderName::from_static(IDEMPOTENCY_HEADER),
                    header::HeaderName::from_static(ADMIN_HEADER),
                ]),
        );
    }
    r.with_state(app)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, app: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, app).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, app: Arc<AppState>) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
