//! HTTP/WebSocket front end and the ingestion loop behind it.

use std::future::{Future, IntoFuture};
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use attnweb_core::analytics::{DEFAULT_BUCKETS, DEFAULT_MAX_SKEW_MS};
use attnweb_core::engine::ConfigError;
use attnweb_core::{Clock, EventConfig, EventEngine, SessionRecord, SystemClock, VirtualClock};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tower_http::services::ServeDir;

use crate::hub::{ConnId, Hub};
use crate::protocol::{ClientMessage, ErrorCode, ServerMessage};
use crate::queue::DEFAULT_CAPACITY;
use crate::recorder::{Recorder, Timeline};
use crate::source::{self, Loaded, SourceError, SourceSpec};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8008";

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub listen: SocketAddr,
    pub source: SourceSpec,
    /// Session file to write; nothing is written when `None`.
    pub record: Option<PathBuf>,
    /// `None` disables the event engine.
    pub engine: Option<EventConfig>,
    /// Directory served at `/` (the demo UI bundle).
    pub ui_dir: Option<PathBuf>,
    pub queue_capacity: usize,
    pub buckets: usize,
    pub max_skew_ms: i64,
    /// Hold the source until this many streams exist.
    pub wait_for_subscribers: usize,
    /// Shut down once the source is exhausted and queues are drained.
    pub exit_when_done: bool,
    /// Virtual time starting at epoch 0; replay pacing costs no wall time.
    pub virtual_clock: bool,
    /// Rewrite replayed timestamps to the clock at emission.
    pub restamp: bool,
}

impl GatewayOptions {
    pub fn new(source: SourceSpec) -> Self {
        GatewayOptions {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            source,
            record: None,
            engine: Some(EventConfig::default()),
            ui_dir: None,
            queue_capacity: DEFAULT_CAPACITY,
            buckets: DEFAULT_BUCKETS,
            max_skew_ms: DEFAULT_MAX_SKEW_MS,
            wait_for_subscribers: 0,
            exit_when_done: false,
            virtual_clock: false,
            restamp: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("invalid event configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("bucket count must be at least 1")]
    Buckets,
    #[error("UI directory {0} does not exist")]
    UiDir(PathBuf),
    #[error("cannot create session file {path}: {source}")]
    Record { path: PathBuf, source: io::Error },
    #[error("server failed: {0}")]
    Serve(io::Error),
    #[error("cannot flush session file: {0}")]
    Flush(io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub samples: u64,
    pub events: u64,
    pub scrolls: u64,
    /// Records in the session file (or that would have been written).
    pub records: usize,
    pub source_finished: bool,
}

struct App {
    hub: Hub,
    recorder: Recorder,
    buckets: usize,
    max_skew_ms: i64,
    samples: AtomicU64,
    events: AtomicU64,
    scrolls: AtomicU64,
    source_finished: AtomicBool,
}

/// A gateway with its source loaded and its port bound, not yet serving.
pub struct Gateway {
    listener: TcpListener,
    app: Arc<App>,
    loaded: Loaded,
    clock: Arc<dyn Clock>,
    opts: GatewayOptions,
}

impl Gateway {
    /// Validates the configuration, opens every referenced file and binds
    /// the listen address.
    pub async fn bind(opts: GatewayOptions) -> Result<Self, GatewayError> {
        if let Some(cfg) = &opts.engine {
            cfg.validate()?;
        }
        if opts.buckets == 0 {
            return Err(GatewayError::Buckets);
        }
        if let Some(dir) = opts.ui_dir.as_ref().filter(|d| !d.is_dir()) {
            return Err(GatewayError::UiDir(dir.clone()));
        }
        let loaded = source::load(&opts.source)?;
        let clock: Arc<dyn Clock> =
            if opts.virtual_clock { Arc::new(VirtualClock::new(0)) } else { Arc::new(SystemClock::new()) };

        let timeline = match (&loaded, opts.restamp) {
            (Loaded::Device(_), _) | (_, true) => Timeline::Clock,
            (loaded, false) => Timeline::Source { speed: loaded.speed() },
        };
        let origin = loaded.origin().unwrap_or_else(|| clock.now_ms());
        let recorder = Recorder::new(opts.record.as_deref(), clock.clone(), timeline, origin)
            .map_err(|source| GatewayError::Record { path: opts.record.clone().unwrap_or_default(), source })?;

        let listener =
            TcpListener::bind(opts.listen).await.map_err(|source| GatewayError::Bind { addr: opts.listen, source })?;
        let app = Arc::new(App {
            hub: Hub::new(opts.queue_capacity),
            recorder,
            buckets: opts.buckets,
            max_skew_ms: opts.max_skew_ms,
            samples: AtomicU64::new(0),
            events: AtomicU64::new(0),
            scrolls: AtomicU64::new(0),
            source_finished: AtomicBool::new(false),
        });
        Ok(Gateway { listener, app, loaded, clock, opts })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until `shutdown` resolves (or, with `exit_when_done`, the
    /// source ends), then flushes the session file.
    pub async fn run<F>(self, shutdown: F) -> Result<RunSummary, GatewayError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let Gateway { listener, app, loaded, clock, opts } = self;
        let (ended_tx, ended_rx) = watch::channel(false);
        let ingest = tokio::spawn(ingest(app.clone(), loaded, clock, opts.clone(), ended_tx));

        let mut router = Router::new()
            .route("/eeg", get(ws_upgrade))
            .route("/profiles", get(all_profiles))
            .route("/profile/{*page}", get(one_profile))
            .with_state(app.clone());
        if let Some(dir) = &opts.ui_dir {
            router = router.fallback_service(ServeDir::new(dir));
        }

        let (stop_tx, stop_rx) = watch::channel(false);
        let hub_app = app.clone();
        let exit_when_done = opts.exit_when_done;
        let graceful = async move {
            tokio::select! {
                _ = shutdown => {}
                _ = until_set(ended_rx), if exit_when_done => {}
            }
            hub_app.hub.close_all();
            stop_tx.send_replace(true);
        };
        let server = tokio::spawn(axum::serve(listener, router).with_graceful_shutdown(graceful).into_future());

        // Clients that never answer the close handshake must not hold the
        // process open.
        until_set(stop_rx).await;
        let served = match tokio::time::timeout(Duration::from_secs(3), server).await {
            Ok(joined) => joined.expect("server task does not panic").map_err(GatewayError::Serve),
            Err(_) => Ok(()),
        };

        ingest.abort();
        let summary = RunSummary {
            samples: app.samples.load(Ordering::Relaxed),
            events: app.events.load(Ordering::Relaxed),
            scrolls: app.scrolls.load(Ordering::Relaxed),
            records: app.recorder.flush().map_err(GatewayError::Flush)?,
            source_finished: app.source_finished.load(Ordering::Relaxed),
        };
        served?;
        Ok(summary)
    }
}

async fn until_set(mut rx: watch::Receiver<bool>) {
    while !*rx.borrow_and_update() {
        if rx.changed().await.is_err() {
            return std::future::pending().await;
        }
    }
}

async fn ingest(
    app: Arc<App>,
    loaded: Loaded,
    clock: Arc<dyn Clock>,
    opts: GatewayOptions,
    ended: watch::Sender<bool>,
) {
    if opts.wait_for_subscribers > 0 {
        let mut count = app.hub.stream_count();
        let _ = count.wait_for(|n| *n >= opts.wait_for_subscribers).await;
    }
    let mut engine = opts.engine.map(|cfg| EventEngine::new(cfg).expect("validated in bind"));
    let (tx, mut rx) = mpsc::channel(1024);
    let restamp = opts.restamp;
    std::thread::spawn(move || source::produce(loaded, clock, restamp, tx));

    while let Some(record) = rx.recv().await {
        let Some(sample) = record.as_sample() else {
            app.recorder.append_source(record);
            continue;
        };
        app.recorder.append_source(record);
        app.hub.deliver(&sample);
        app.samples.fetch_add(1, Ordering::Relaxed);
        let Some(engine) = engine.as_mut() else { continue };
        match engine.on_sample(&sample) {
            Ok(events) => {
                for e in events {
                    app.recorder.append(SessionRecord::event(&e));
                    app.hub.broadcast_event(&e);
                    app.events.fetch_add(1, Ordering::Relaxed);
                }
            }
            Err(d) => tracing::debug!(?d, "sample not used by the engine"),
        }
    }
    app.hub.broadcast(&ServerMessage::SourceEnded);
    app.source_finished.store(true, Ordering::Relaxed);
    ended.send_replace(true);
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<Arc<App>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, app))
}

async fn connection(socket: WebSocket, app: Arc<App>) {
    let (conn, outbox) = app.hub.connect();
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = outbox.pop().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        let _ = sink.send(Message::Close(None)).await;
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => handle_text(&app, conn, text.as_str()),
            Message::Close(_) => break,
            _ => {}
        }
    }
    app.hub.disconnect(conn);
    let _ = writer.await;
}

fn handle_text(app: &App, conn: ConnId, text: &str) {
    let msg = match serde_json::from_str::<ClientMessage>(text) {
        Ok(m) => m,
        Err(e) => {
            app.hub.send(conn, &ServerMessage::error(ErrorCode::BadRequest, e.to_string()));
            return;
        }
    };
    match msg {
        ClientMessage::Subscribe { tracks, frequency_hz, events } => {
            app.hub.handle_subscribe(conn, &tracks, frequency_hz, events);
        }
        ClientMessage::Unsubscribe { stream_id } => {
            app.hub.unsubscribe(conn, &stream_id);
        }
        ClientMessage::Scroll { page, offset, viewport, content } => {
            let reply = match validate_scroll(&page, offset, viewport, content) {
                Ok(()) => {
                    let r = app.recorder.record_scroll(page, offset, viewport, content);
                    app.scrolls.fetch_add(1, Ordering::Relaxed);
                    ServerMessage::Ack { t: Some(r.t) }
                }
                Err(why) => ServerMessage::error(ErrorCode::InvalidScroll, why),
            };
            app.hub.send(conn, &reply);
        }
    }
}

fn validate_scroll(page: &str, offset: f64, viewport: f64, content: f64) -> Result<(), &'static str> {
    if page.is_empty() {
        return Err("page must be non-empty");
    }
    if !(viewport > 0.0 && viewport.is_finite()) {
        return Err("viewport must be positive");
    }
    if !(content > 0.0 && content.is_finite()) {
        return Err("content must be positive");
    }
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err("offset must be non-negative");
    }
    Ok(())
}

fn analysis_error(e: impl ToString) -> Response {
    (StatusCode::INTERNAL_SERVER_ERROR, Json(ServerMessage::error(ErrorCode::BadRequest, e.to_string())))
        .into_response()
}

async fn all_profiles(State(app): State<Arc<App>>) -> Response {
    match app.recorder.analysis(app.buckets, app.max_skew_ms) {
        Ok(a) => Json(a.profiles).into_response(),
        Err(e) => analysis_error(e),
    }
}

async fn one_profile(State(app): State<Arc<App>>, Path(page): Path<String>) -> Response {
    match app.recorder.analysis(app.buckets, app.max_skew_ms) {
        Ok(mut a) => match a.profiles.remove(&page) {
            Some(p) => Json(p).into_response(),
            None => (
                StatusCode::NOT_FOUND,
                Json(ServerMessage::error(ErrorCode::BadRequest, format!("no profile for page `{page}`"))),
            )
                .into_response(),
        },
        Err(e) => analysis_error(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scroll_validation() {
        assert!(validate_scroll("p", 0.0, 800.0, 1600.0).is_ok());
        assert!(validate_scroll("p", 0.0, 0.0, 1600.0).is_err());
        assert!(validate_scroll("p", -1.0, 800.0, 1600.0).is_err());
        assert!(validate_scroll("", 0.0, 800.0, 1600.0).is_err());
        assert!(validate_scroll("p", f64::NAN, 800.0, 1600.0).is_err());
    }
}
