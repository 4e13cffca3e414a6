//! Live attention sessions over websockets.
//!
//! `GET /session` upgrades to a websocket. The first client message is either
//! `hello`, which starts a new session owned by that connection, or
//! `observe`, which attaches read-only to a running session by id. The owner
//! streams samples, trigger changes and camera moves; a tick loop integrates
//! them every `tick_ms` and pushes a frame to the owner and every observer
//! while the revisualization is visible. `GET /healthz` answers `ok`.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use aav_core::session::{LogHeader, Recorder, SessionError, LOG_EXTENSION, SNAPSHOT_EXTENSION};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::stream::{SplitSink, SplitStream};
use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::{interval_at, Instant, MissedTickBehavior};

pub mod protocol;

use protocol::{ClientMessage, ErrorCode, Hello, ServerMessage};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid {name}: {value:?}")]
    Invalid { name: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    /// Overrides the tick length requested by clients.
    pub tick_ms: Option<u64>,
    /// Where session logs and final snapshots are written, if anywhere.
    pub log_dir: Option<PathBuf>,
    /// Frames an observer may fall behind before it is disconnected.
    pub observer_buffer: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            tick_ms: None,
            log_dir: None,
            observer_buffer: 64,
        }
    }
}

fn parse_var<T: std::str::FromStr>(
    name: &'static str,
    value: Option<&str>,
) -> Result<Option<T>, ConfigError> {
    match value {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::Invalid {
                name,
                value: v.to_string(),
            }),
    }
}

/// Port and config from `AAV_PORT`, `AAV_TICK_MS` and `AAV_LOG_DIR` values.
pub fn config_from_vars(
    port: Option<&str>,
    tick_ms: Option<&str>,
    log_dir: Option<&str>,
) -> Result<(u16, ServerConfig), ConfigError> {
    let port = parse_var::<u16>("AAV_PORT", port)?.unwrap_or(DEFAULT_PORT);
    let tick_ms = parse_var::<u64>("AAV_TICK_MS", tick_ms)?;
    if tick_ms == Some(0) {
        return Err(ConfigError::Invalid {
            name: "AAV_TICK_MS",
            value: "0".into(),
        });
    }
    Ok((
        port,
        ServerConfig {
            tick_ms,
            log_dir: log_dir.filter(|d| !d.is_empty()).map(PathBuf::from),
            ..ServerConfig::default()
        },
    ))
}

pub fn config_from_env() -> Result<(u16, ServerConfig), ConfigError> {
    let var = |k: &str| std::env::var(k).ok();
    config_from_vars(
        var("AAV_PORT").as_deref(),
        var("AAV_TICK_MS").as_deref(),
        var("AAV_LOG_DIR").as_deref(),
    )
}

type SnapshotRequest = oneshot::Sender<Arc<str>>;

#[derive(Clone)]
struct SessionHandle {
    header: LogHeader,
    frames: broadcast::Sender<Arc<str>>,
    snapshots: mpsc::Sender<SnapshotRequest>,
}

/// Shared server state: configuration and the registry of live sessions.
pub struct Server {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl Server {
    pub fn new(config: ServerConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// Ids of the sessions currently running.
    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.registry().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn registry(&self) -> std::sync::MutexGuard<'_, HashMap<String, SessionHandle>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/healthz", get(|| async { "ok" }))
            .route("/session", get(upgrade))
            .with_state(self.clone())
    }
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, server: Arc<Server>) -> std::io::Result<()> {
    axum::serve(listener, server.router()).await
}

/// Binds `addr` and serves; returns the bound address through `ready`.
pub async fn bind_and_serve(
    addr: SocketAddr,
    server: Arc<Server>,
    ready: Option<oneshot::Sender<SocketAddr>>,
) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tracing::info!(%local, "listening");
    if let Some(tx) = ready {
        let _ = tx.send(local);
    }
    serve(listener, server).await
}

async fn upgrade(ws: WebSocketUpgrade, State(server): State<Arc<Server>>) -> Response {
    ws.on_upgrade(move |socket| handle_socket(socket, server))
}

type Tx = SplitSink<WebSocket, Message>;
type Rx = SplitStream<WebSocket>;

async fn send_text(tx: &mut Tx, text: &str) -> bool {
    tx.send(Message::Text(text.into())).await.is_ok()
}

async fn reject(tx: &mut Tx, code: ErrorCode, text: impl Into<String>) {
    let _ = send_text(tx, &ServerMessage::error(code, text).to_json()).await;
    let _ = tx.send(Message::Close(None)).await;
}

enum Incoming {
    Text(String),
    Closed,
    Binary,
}

async fn next_message(rx: &mut Rx) -> Incoming {
    loop {
        match rx.next().await {
            Some(Ok(Message::Text(t))) => return Incoming::Text(t.as_str().to_owned()),
            Some(Ok(Message::Binary(_))) => return Incoming::Binary,
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
            Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return Incoming::Closed,
        }
    }
}

async fn handle_socket(socket: WebSocket, server: Arc<Server>) {
    let (mut tx, mut rx) = socket.split();
    let first = match next_message(&mut rx).await {
        Incoming::Text(t) => t,
        Incoming::Binary => {
            return reject(&mut tx, ErrorCode::Malformed, "messages must be JSON text").await
        }
        Incoming::Closed => return,
    };
    match serde_json::from_str::<ClientMessage>(&first) {
        Ok(ClientMessage::Hello(hello)) => run_owner(hello, tx, rx, server).await,
        Ok(ClientMessage::Observe { session_id }) => run_observer(session_id, tx, rx, server).await,
        Ok(_) => {
            reject(
                &mut tx,
                ErrorCode::Handshake,
                "first message must be hello or observe",
            )
            .await
        }
        Err(e) => reject(&mut tx, ErrorCode::Malformed, e.to_string()).await,
    }
}

fn session_error(e: SessionError) -> (ErrorCode, String) {
    (ErrorCode::Invalid, e.to_string())
}

/// Applies one owner message; an error ends the connection.
fn handle_owner_message(
    rec: &mut Recorder,
    text: &str,
    now_ms: u64,
) -> Result<Option<ServerMessage>, (ErrorCode, String)> {
    let msg: ClientMessage =
        serde_json::from_str(text).map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
    match msg {
        ClientMessage::Hello(_) | ClientMessage::Observe { .. } => Err((
            ErrorCode::Handshake,
            "session already started on this connection".into(),
        )),
        ClientMessage::Sample { sample } => {
            let reported = sample.timestamp_ms;
            rec.record_sample(sample, reported).map_err(session_error)?;
            Ok(None)
        }
        ClientMessage::Trigger { pressed } => {
            rec.record_trigger(pressed, now_ms).map_err(session_error)?;
            Ok(None)
        }
        ClientMessage::Camera { camera } => {
            rec.record_camera(camera, now_ms).map_err(session_error)?;
            Ok(None)
        }
        ClientMessage::SnapshotRequest => Ok(Some(ServerMessage::Snapshot {
            snapshot: rec.snapshot(),
        })),
    }
}

fn open_log(server: &Server, id: &str, rec: Recorder) -> Result<Recorder, SessionError> {
    match &server.config.log_dir {
        None => Ok(rec),
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let file = File::create(dir.join(format!("{id}.{LOG_EXTENSION}")))?;
            rec.with_sink(Box::new(BufWriter::new(file)))
        }
    }
}

async fn run_owner(hello: Hello, mut tx: Tx, mut rx: Rx, server: Arc<Server>) {
    let mut header = hello.into_header();
    if let Some(t) = server.config.tick_ms {
        header.params.tick_ms = t;
    }
    let id = uuid::Uuid::new_v4().to_string();
    let rec = Recorder::new(header.clone()).and_then(|r| open_log(&server, &id, r));
    let mut rec = match rec {
        Ok(r) => r,
        Err(e) => return reject(&mut tx, ErrorCode::Invalid, e.to_string()).await,
    };
    let welcome = ServerMessage::Welcome {
        session_id: id.clone(),
        config: header.clone(),
    };
    if !send_text(&mut tx, &welcome.to_json()).await {
        return;
    }
    let (frames, _) = broadcast::channel(server.config.observer_buffer.max(1));
    let (snap_tx, mut snap_rx) = mpsc::channel::<SnapshotRequest>(16);
    server.registry().insert(
        id.clone(),
        SessionHandle {
            header: header.clone(),
            frames: frames.clone(),
            snapshots: snap_tx,
        },
    );
    tracing::info!(session = %id, "session started");

    let period = Duration::from_millis(header.params.tick_ms);
    let start = Instant::now();
    let mut ticker = interval_at(start + period, period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                match rec.tick() {
                    Ok(Some(frame)) => {
                        let text: Arc<str> = ServerMessage::Frame(frame).to_json().into();
                        let _ = frames.send(text.clone());
                        if !send_text(&mut tx, &text).await {
                            break;
                        }
                    }
                    Ok(None) => {}
                    Err(e) => {
                        reject(&mut tx, ErrorCode::Internal, e.to_string()).await;
                        break;
                    }
                }
            }
            incoming = next_message(&mut rx) => match incoming {
                Incoming::Text(text) => {
                    let now = start.elapsed().as_millis() as u64;
                    match handle_owner_message(&mut rec, &text, now) {
                        Ok(Some(reply)) => {
                            if !send_text(&mut tx, &reply.to_json()).await {
                                break;
                            }
                        }
                        Ok(None) => {}
                        Err((code, text)) => {
                            reject(&mut tx, code, text).await;
                            break;
                        }
                    }
                }
                Incoming::Binary => {
                    reject(&mut tx, ErrorCode::Malformed, "messages must be JSON text").await;
                    break;
                }
                Incoming::Closed => break,
            },
            Some(reply) = snap_rx.recv() => {
                let snapshot = ServerMessage::Snapshot { snapshot: rec.snapshot() };
                let _ = reply.send(snapshot.to_json().into());
            }
        }
    }

    server.registry().remove(&id);
    if let Some(dir) = &server.config.log_dir {
        let path = dir.join(format!("{id}.{SNAPSHOT_EXTENSION}"));
        if let Err(e) = rec.snapshot().save(&path) {
            tracing::warn!(session = %id, error = %e, "could not write final snapshot");
        }
    }
    tracing::info!(session = %id, ticks = rec.engine().ticks(), "session ended");
}

async fn run_observer(id: String, mut tx: Tx, mut rx: Rx, server: Arc<Server>) {
    let handle = server.registry().get(&id).cloned();
    let Some(handle) = handle else {
        return reject(&mut tx, ErrorCode::UnknownSession, format!("no session {id}")).await;
    };
    let SessionHandle {
        header,
        frames: sender,
        snapshots,
    } = handle;
    // Keep only the receiving end so the stream closes with the session.
    let mut frames = sender.subscribe();
    drop(sender);
    let welcome = ServerMessage::Welcome {
        session_id: id,
        config: header,
    };
    if !send_text(&mut tx, &welcome.to_json()).await {
        return;
    }
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if !send_text(&mut tx, &text).await {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    reject(&mut tx, ErrorCode::Lagged, format!("missed {n} frames")).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = tx.send(Message::Close(None)).await;
                    break;
                }
            },
            incoming = next_message(&mut rx) => match incoming {
                Incoming::Text(text) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::SnapshotRequest) => {
                        let (reply_tx, reply_rx) = oneshot::channel();
                        if snapshots.send(reply_tx).await.is_err() {
                            break;
                        }
                        match reply_rx.await {
                            Ok(text) => {
                                if !send_text(&mut tx, &text).await {
                                    break;
                                }
                            }
                            Err(_) => break,
                        }
                    }
                    Ok(_) => {
                        reject(&mut tx, ErrorCode::ReadOnly, "observers may only request snapshots").await;
                        break;
                    }
                    Err(e) => {
                        reject(&mut tx, ErrorCode::Malformed, e.to_string()).await;
                        break;
                    }
                },
                Incoming::Binary => {
                    reject(&mut tx, ErrorCode::Malformed, "messages must be JSON text").await;
                    break;
                }
                Incoming::Closed => break,
            },
        }
    }
}
