//! HTTP and websocket front end for game sessions.
//!
//! Every websocket frame is a JSON [`ProtocolMessage`]. Clients send
//! `CreateSession` or `SubmitAction`; the server answers with
//! `SessionCreated`, `StateSnapshot`, `StepEvents`, `Hints`, `EndOfGame` and
//! `Error`. Step results are broadcast to every socket watching the session.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Mutex};

use crate::culture::{Culture, CultureDocument, Level};
use crate::game::{GameError, GameSession, Hint, HumanAction, Mode, SessionConfig, StateSnapshot, StepEvents};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub body: MessageBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum MessageBody {
    CreateSession(CreateSession),
    SessionCreated(SessionCreated),
    SubmitAction(SubmitAction),
    StateSnapshot(StateSnapshot),
    StepEvents(StepEvents),
    Hints(HintsPayload),
    Error(ErrorPayload),
    EndOfGame(EndOfGame),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub level: Level,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Map text; the built-in map when absent.
    #[serde(default)]
    pub map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub seed: u64,
    pub snapshot: StateSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAction {
    pub action: HumanAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintsPayload {
    pub hints: Vec<Hint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    IllegalAction,
    Finished,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndOfGame {
    pub fuel: i64,
    pub moves: u64,
    pub collisions: u64,
    pub t: u32,
}

impl ProtocolMessage {
    pub fn new(session_id: Option<&str>, body: MessageBody) -> Self {
        ProtocolMessage { version: PROTOCOL_VERSION, session_id: session_id.map(str::to_string), body }
    }

    pub fn error(session_id: Option<&str>, code: ErrorCode, message: impl Into<String>) -> Self {
        Self::new(session_id, MessageBody::Error(ErrorPayload { code, message: message.into() }))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol messages serialize")
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    /// Finished and expired sessions write their replay log here.
    pub replay_dir: Option<PathBuf>,
    pub idle_timeout: Duration,
    pub max_sessions: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            replay_dir: None,
            idle_timeout: Duration::from_secs(30 * 60),
            max_sessions: 1024,
        }
    }
}

struct Slot {
    session: Mutex<GameSession>,
    created: Instant,
    last_active: Mutex<Instant>,
    tx: broadcast::Sender<String>,
}

impl Slot {
    /// The session clock, stamped by the server.
    fn now_ms(&self) -> u64 {
        self.created.elapsed().as_millis() as u64
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState { inner: Arc::new(Inner { config, sessions: Mutex::new(HashMap::new()) }) }
    }

    pub async fn session_count(&self) -> usize {
        self.inner.sessions.lock().await.len()
    }

    async fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        self.inner.sessions.lock().await.get(id).cloned()
    }

    async fn create(&self, req: &CreateSession) -> Result<SessionCreated, (ErrorCode, String)> {
        let seed = req.seed.unwrap_or_else(rand::random);
        let mut config = SessionConfig::new(req.level, req.mode, seed);
        if let Some(text) = &req.map {
            config = config.with_map_text(text).map_err(|e| (ErrorCode::BadRequest, e.to_string()))?;
        }
        // Built outside the registry lock so other sessions never wait on it.
        let session = GameSession::new(config).map_err(|e| (ErrorCode::BadRequest, e.to_string()))?;
        let snapshot = session.snapshot();
        let id = uuid::Uuid::new_v4().to_string();
        let (tx, _) = broadcast::channel(64);
        let now = Instant::now();
        let slot = Arc::new(Slot { session: Mutex::new(session), created: now, last_active: Mutex::new(now), tx });
        {
            let mut sessions = self.inner.sessions.lock().await;
            if sessions.len() >= self.inner.config.max_sessions {
                return Err((ErrorCode::Internal, "too many sessions".into()));
            }
            sessions.insert(id.clone(), slot);
        }
        tracing::info!(session = %id, level = %req.level, mode = %req.mode, seed, "session created");
        let created_at =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        Ok(SessionCreated { session_id: id, created_at, seed, snapshot })
    }

    /// Applies an action and returns the messages it produced, in order.
    async fn submit(&self, id: &str, action: HumanAction) -> Result<Vec<ProtocolMessage>, ProtocolMessage> {
        let slot = self
            .slot(id)
            .await
            .ok_or_else(|| ProtocolMessage::error(Some(id), ErrorCode::NotFound, "no such session"))?;
        let mut session = slot.session.lock().await;
        *slot.last_active.lock().await = Instant::now();
        let events = session.step(action, slot.now_ms()).map_err(|e| {
            let code = match e {
                GameError::IllegalAction { .. } => ErrorCode::IllegalAction,
                GameError::Finished => ErrorCode::Finished,
                _ => ErrorCode::Internal,
            };
            ProtocolMessage::error(Some(id), code, e.to_string())
        })?;
        let sid = Some(id);
        let mut out = vec![
            ProtocolMessage::new(sid, MessageBody::StepEvents(events)),
            ProtocolMessage::new(sid, MessageBody::StateSnapshot(session.snapshot())),
        ];
        if session.config().mode == Mode::X {
            let hints = session.current_hints().to_vec();
            out.push(ProtocolMessage::new(sid, MessageBody::Hints(HintsPayload { hints })));
        }
        if session.is_finished() {
            out.push(ProtocolMessage::new(
                sid,
                MessageBody::EndOfGame(EndOfGame {
                    fuel: session.fuel(),
                    moves: session.move_count(),
                    collisions: session.collision_count(),
                    t: session.time(),
                }),
            ));
            self.persist(id, &session).await;
        }
        for m in &out {
            let _ = slot.tx.send(m.to_json());
        }
        Ok(out)
    }

    async fn persist(&self, id: &str, session: &GameSession) {
        let Some(dir) = &self.inner.config.replay_dir else {
            return;
        };
        let path = dir.join(format!("{id}.jsonl"));
        if let Err(e) = tokio::fs::create_dir_all(dir).await {
            tracing::warn!(error = %e, "cannot create replay directory");
            return;
        }
        match tokio::fs::write(&path, session.replay_log()).await {
            Ok(()) => tracing::info!(path = %path.display(), "replay written"),
            Err(e) => tracing::warn!(error = %e, "cannot write replay"),
        }
    }

    /// Drops sessions idle for longer than the configured timeout, saving
    /// their replays first. Returns how many were dropped.
    pub async fn expire_idle(&self) -> usize {
        let timeout = self.inner.config.idle_timeout;
        let mut expired = Vec::new();
        {
            let mut sessions = self.inner.sessions.lock().await;
            let mut keep = HashMap::new();
            for (id, slot) in sessions.drain() {
                if slot.last_active.lock().await.elapsed() >= timeout {
                    expired.push((id, slot));
                } else {
                    keep.insert(id, slot);
                }
            }
            *sessions = keep;
        }
        for (id, slot) in &expired {
            let session = slot.session.lock().await;
            if !session.is_finished() {
                self.persist(id, &session).await;
            }
            tracing::info!(session = %id, "session expired");
        }
        expired.len()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/cultures", get(cultures))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/replay", get(get_replay))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/ws", get(ws_session))
        .route("/ws", get(ws_lobby))
        .with_state(state)
}

fn json_error(status: StatusCode, msg: ProtocolMessage) -> Response {
    (status, Json(msg)).into_response()
}

async fn cultures() -> Json<Vec<CultureDocument>> {
    Json(Level::ALL.into_iter().map(|l| Culture::builtin(l).to_document()).collect())
}

async fn create_session(State(state): State<AppState>, Json(req): Json<CreateSession>) -> Response {
    match state.create(&req).await {
        Ok(created) => {
            let msg = ProtocolMessage::new(Some(&created.session_id.clone()), MessageBody::SessionCreated(created));
            (StatusCode::CREATED, Json(msg)).into_response()
        }
        Err((code, message)) => json_error(StatusCode::BAD_REQUEST, ProtocolMessage::error(None, code, message)),
    }
}

fn not_found(id: &str) -> Response {
    json_error(StatusCode::NOT_FOUND, ProtocolMessage::error(Some(id), ErrorCode::NotFound, "no such session"))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.slot(&id).await {
        Some(slot) => {
            let snapshot = slot.session.lock().await.snapshot();
            Json(ProtocolMessage::new(Some(&id), MessageBody::StateSnapshot(snapshot))).into_response()
        }
        None => not_found(&id),
    }
}

async fn get_replay(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.slot(&id).await {
        Some(slot) => {
            let log = slot.session.lock().await.replay_log();
            ([(header::CONTENT_TYPE, "application/x-ndjson")], log).into_response()
        }
        None => not_found(&id),
    }
}

async fn post_action(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<SubmitAction>) -> Response {
    match state.submit(&id, req.action).await {
        Ok(messages) => Json(messages).into_response(),
        Err(err) => {
            let status = match &err.body {
                MessageBody::Error(ErrorPayload { code: ErrorCode::NotFound, .. }) => StatusCode::NOT_FOUND,
                MessageBody::Error(ErrorPayload { code: ErrorCode::Internal, .. }) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            };
            json_error(status, err)
        }
    }
}

async fn ws_session(ws: WebSocketUpgrade, State(state): State<AppState>, Path(id): Path<String>) -> Response {
    if state.slot(&id).await.is_none() {
        return not_found(&id);
    }
    ws.on_upgrade(move |socket| handle_socket(state, socket, Some(id)))
}

async fn ws_lobby(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| handle_socket(state, socket, None))
}

async fn send(socket: &mut WebSocket, msg: &ProtocolMessage) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn handle_socket(state: AppState, mut socket: WebSocket, mut attached: Option<String>) {
    let mut rx = None;
    if let Some(id) = &attached {
        if let Some(slot) = state.slot(id).await {
            rx = Some(slot.tx.subscribe());
            let snapshot = slot.session.lock().await.snapshot();
            if !send(&mut socket, &ProtocolMessage::new(Some(id), MessageBody::StateSnapshot(snapshot))).await {
                return;
            }
        }
    }
    loop {
        let incoming = match rx.as_mut() {
            Some(rx) => tokio::select! {
                m = socket.recv() => m,
                b = rx.recv() => {
                    match b {
                        Ok(text) => {
                            if socket.send(Message::Text(text.into())).await.is_err() {
                                return;
                            }
                        }
                        Err(broadcast::error::RecvError::Lagged(n)) => {
                            tracing::warn!(skipped = n, "websocket client lagging");
                        }
                        Err(broadcast::error::RecvError::Closed) => return,
                    }
                    continue;
                }
            },
            None => socket.recv().await,
        };
        let text = match incoming {
            Some(Ok(Message::Text(t))) => t,
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
            Some(Ok(_)) => continue,
        };
        let msg: ProtocolMessage = match serde_json::from_str(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                let reply = ProtocolMessage::error(attached.as_deref(), ErrorCode::BadRequest, e.to_string());
                if !send(&mut socket, &reply).await {
                    return;
                }
                continue;
            }
        };
        if msg.version != PROTOCOL_VERSION {
            let reply = ProtocolMessage::error(
                attached.as_deref(),
                ErrorCode::BadRequest,
                format!("unsupported protocol version {}", msg.version),
            );
            if !send(&mut socket, &reply).await {
                return;
            }
            continue;
        }
        match msg.body {
            MessageBody::CreateSession(req) => match state.create(&req).await {
                Ok(created) => {
                    let id = created.session_id.clone();
                    let slot = state.slot(&id).await.expect("just created");
                    rx = Some(slot.tx.subscribe());
                    attached = Some(id.clone());
                    let reply = ProtocolMessage::new(Some(&id), MessageBody::SessionCreated(created));
                    if !send(&mut socket, &reply).await {
                        return;
                    }
                }
                Err((code, message)) => {
                    if !send(&mut socket, &ProtocolMessage::error(None, code, message)).await {
                        return;
                    }
                }
            },
            MessageBody::SubmitAction(SubmitAction { action }) => {
                let Some(id) = msg.session_id.or_else(|| attached.clone()) else {
                    let reply = ProtocolMessage::error(None, ErrorCode::BadRequest, "no session attached");
                    if !send(&mut socket, &reply).await {
                        return;
                    }
                    continue;
                };
                // Successful steps reach this socket through the broadcast.
                if let Err(reply) = state.submit(&id, action).await {
                    if !send(&mut socket, &reply).await {
                        return;
                    }
                }
            }
            other => {
                let reply = ProtocolMessage::error(
                    attached.as_deref(),
                    ErrorCode::BadRequest,
                    format!("clients may not send {}", message_type(&other)),
                );
                if !send(&mut socket, &reply).await {
                    return;
                }
            }
        }
    }
}

fn message_type(body: &MessageBody) -> &'static str {
    match body {
        MessageBody::CreateSession(_) => "CreateSession",
        MessageBody::SessionCreated(_) => "SessionCreated",
        MessageBody::SubmitAction(_) => "SubmitAction",
        MessageBody::StateSnapshot(_) => "StateSnapshot",
        MessageBody::StepEvents(_) => "StepEvents",
        MessageBody::Hints(_) => "Hints",
        MessageBody::Error(_) => "Error",
        MessageBody::EndOfGame(_) => "EndOfGame",
    }
}

/// Serves until the listener fails. Idle sessions are swept once a minute
/// or once per timeout, whichever is shorter.
pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    serve_on(listener, config).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, config: ServerConfig) -> std::io::Result<()> {
    let sweep = config.idle_timeout.min(Duration::from_secs(60)).max(Duration::from_millis(100));
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        loop {
            tick.tick().await;
            sweeper.expire_idle().await;
        }
    });
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
