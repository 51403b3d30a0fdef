//! HTTP+JSON routes over a [`SessionManager`], plus a websocket per session
//! that replays each AI turn one addition at a time.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use morai_core::events::{to_jsonl_string, Actor, Ranking, Task};
use morai_core::level::{serialize_level_text, Placement, SpriteId, SpritePalette, LEVEL_HEIGHT};
use morai_core::session::{RankRequest, SessionError, SessionManager, SessionStatus};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionManager>,
    streams: Arc<Mutex<HashMap<String, broadcast::Sender<StreamMessage>>>>,
}

impl AppState {
    pub fn new(sessions: Arc<SessionManager>) -> Self {
        AppState { sessions, streams: Arc::default() }
    }

    fn stream(&self, id: &str) -> broadcast::Sender<StreamMessage> {
        let mut streams = self.streams.lock().unwrap_or_else(|p| p.into_inner());
        streams.entry(id.to_string()).or_insert_with(|| broadcast::channel(64).0).clone()
    }
}

/// Pushed on `/sessions/{id}/stream`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Addition { turn: usize, index: usize, x: usize, y: usize, sprite: usize },
    TurnComplete { turn: usize, count: usize },
}

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::UnknownAgent(_) | SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::WrongPhase { .. } => StatusCode::CONFLICT,
            SessionError::Rejected(_) | SessionError::Rank(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Agent(_) | SessionError::Log(_) | SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A sprite given by palette index or by name.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SpriteRef {
    Index(usize),
    Name(String),
}

impl SpriteRef {
    fn resolve(&self) -> Result<SpriteId, SessionError> {
        match self {
            SpriteRef::Index(i) => SpriteId::new(*i).map_err(|e| SessionError::Rejected(e.to_string())),
            SpriteRef::Name(n) => SpritePalette::standard()
                .by_name(n)
                .ok_or_else(|| SessionError::Rejected(format!("unknown sprite {n:?}"))),
        }
    }
}

#[derive(Deserialize)]
struct CreateBody {
    participant_id: String,
    agent: String,
    #[serde(default = "default_task")]
    task: Task,
    level_width: Option<usize>,
}

fn default_task() -> Task {
    Task::AboveGround
}

#[derive(Deserialize)]
struct PlaceBody {
    x: usize,
    y: usize,
    sprite: SpriteRef,
}

#[derive(Deserialize)]
struct CellBody {
    x: usize,
    y: usize,
}

#[derive(Deserialize, Default)]
struct EndTurnBody {
    camera_x: Option<usize>,
}

#[derive(Deserialize)]
struct RankBody {
    participant_id: String,
    first_session: String,
    second_session: String,
    first: Ranking,
    second: Ranking,
}

#[derive(Serialize)]
struct Cell {
    x: usize,
    y: usize,
    sprite: usize,
}

impl From<&Placement> for Cell {
    fn from(p: &Placement) -> Self {
        Cell { x: p.x, y: p.y, sprite: p.sprite.index() }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/agents", get(agents))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/place", post(place))
        .route("/sessions/{id}/delete", post(delete))
        .route("/sessions/{id}/end-turn", post(end_turn))
        .route("/sessions/{id}/end", post(end))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/level", get(level))
        .route("/sessions/{id}/log", get(log_file))
        .route("/sessions/{id}/stream", get(stream))
        .route("/rankings", post(rank))
        .with_state(state)
}

async fn agents(State(s): State<AppState>) -> Json<Vec<String>> {
    Json(s.sessions.agent_names())
}

async fn create(State(s): State<AppState>, Json(b): Json<CreateBody>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let width = b.level_width.unwrap_or(s.sessions.config().level_width);
    let id = s.sessions.create_with_width(&b.participant_id, &b.agent, b.task, width)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn status(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionStatus>> {
    Ok(Json(s.sessions.status(&id)?))
}

async fn place(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<PlaceBody>) -> ApiResult<Json<SessionStatus>> {
    s.sessions.place(&id, b.x, b.y, b.sprite.resolve()?)?;
    Ok(Json(s.sessions.status(&id)?))
}

async fn delete(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<CellBody>) -> ApiResult<Json<serde_json::Value>> {
    let owner: Actor = s.sessions.delete(&id, b.x, b.y)?;
    Ok(Json(json!({ "deleted_actor": owner })))
}

async fn end_turn(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<EndTurnBody>>,
) -> ApiResult<Json<serde_json::Value>> {
    let camera = body.unwrap_or_default().0.camera_x;
    let manager = s.sessions.clone();
    let sid = id.clone();
    // agents are CPU-bound; keep them off the async workers
    let additions = tokio::task::spawn_blocking(move || manager.end_turn(&sid, camera))
        .await
        .map_err(|e| SessionError::Rejected(format!("agent task failed: {e}")))??;
    let turn = s.sessions.status(&id)?.turns - 1;
    let tx = s.stream(&id);
    for (index, p) in additions.iter().enumerate() {
        let _ = tx.send(StreamMessage::Addition { turn, index, x: p.x, y: p.y, sprite: p.sprite.index() });
    }
    let _ = tx.send(StreamMessage::TurnComplete { turn, count: additions.len() });
    let cells: Vec<Cell> = additions.iter().map(Cell::from).collect();
    Ok(Json(json!({ "turn": turn, "additions": cells })))
}

async fn end(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionStatus>> {
    s.sessions.end(&id)?;
    Ok(Json(s.sessions.status(&id)?))
}

async fn run(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionStatus>> {
    s.sessions.run(&id)?;
    Ok(Json(s.sessions.status(&id)?))
}

async fn rank(State(s): State<AppState>, Json(b): Json<RankBody>) -> ApiResult<Json<serde_json::Value>> {
    let ranks = RankRequest { first: b.first, second: b.second };
    s.sessions.rank(&b.participant_id, &b.first_session, &b.second_session, ranks)?;
    Ok(Json(json!({ "ranked": [b.first_session, b.second_session] })))
}

async fn level(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let g = s.sessions.level(&id)?;
    let tiles: Vec<[usize; 3]> = g.occupied().map(|(x, y, sp)| [x, y, sp.index()]).collect();
    Ok(Json(json!({
        "width": g.width(),
        "height": LEVEL_HEIGHT,
        "tiles": tiles,
        "text": serialize_level_text(&g, SpritePalette::standard()),
    })))
}

async fn log_file(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = to_jsonl_string(&s.sessions.log(&id)?);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn stream(State(s): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> ApiResult<Response> {
    s.sessions.status(&id)?;
    let rx = s.stream(&id).subscribe();
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<StreamMessage>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(m) => {
                    let text = serde_json::to_string(&m).expect("message serializes");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("stream client lagged by {n} messages"),
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                _ => {}
            },
        }
    }
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
