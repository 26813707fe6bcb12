//! Real-time session server.
//!
//! A single loop task owns the [`Session`] and ticks it at the configured
//! rate. WebSocket connections push inbound frames into a bounded queue that
//! the loop drains at the start of every tick; snapshots and events fan out
//! to all connections through a broadcast channel, while query replies and
//! errors go back to the sender only.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use uvms_core::session::{LogWriter, OutboundMessage, Session, SessionConfig};
use uvms_core::session::SessionStats;
use uvms_core::sim::telemetry::TelemetryWriter;

/// Inbound frames waiting for the loop.
const INBOUND_QUEUE: usize = 1024;
/// Outbound frames buffered per client before it counts as lagging.
const FANOUT_BUFFER: usize = 256;
const REPLY_BUFFER: usize = 64;

#[derive(Clone, Debug, Default)]
pub struct ServeOptions {
    /// Overrides the config's port; `Some(0)` picks a free port.
    pub port: Option<u16>,
    /// Records every accepted inbound message here.
    pub log: Option<PathBuf>,
    pub telemetry: Option<PathBuf>,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ServeOutcome {
    pub ticks: u64,
    pub stats: SessionStats,
}

struct ClientFrame {
    text: String,
    reply: mpsc::Sender<String>,
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::Sender<ClientFrame>,
    fanout: broadcast::Sender<String>,
}

/// Cloneable handle that asks a running server to stop.
#[derive(Clone)]
pub struct StopHandle(Arc<watch::Sender<bool>>);

impl StopHandle {
    pub fn stop(&self) {
        let _ = self.0.send(true);
    }
}

pub struct RunningServer {
    pub addr: SocketAddr,
    stop: StopHandle,
    session_loop: JoinHandle<anyhow::Result<ServeOutcome>>,
    http: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn stop(&self) {
        self.stop.stop();
    }

    pub fn stop_handle(&self) -> StopHandle {
        self.stop.clone()
    }

    /// Waits for the loop to finish (after [`stop`](Self::stop) or
    /// `max_ticks`) and shuts the listener down.
    pub async fn join(self) -> anyhow::Result<ServeOutcome> {
        let outcome = self.session_loop.await.context("session loop panicked")??;
        self.stop.stop();
        self.http.await.context("listener panicked")??;
        Ok(outcome)
    }
}

pub async fn start(config: SessionConfig, opts: ServeOptions) -> anyhow::Result<RunningServer> {
    let port = opts.port.unwrap_or(config.port);
    let session = Session::new(config).context("invalid session config")?;
    let listener = TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port)))
        .await
        .with_context(|| format!("cannot listen on port {port}"))?;
    let addr = listener.local_addr()?;

    let log = match &opts.log {
        Some(p) => Some(LogWriter::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        ))?),
        None => None,
    };
    let telemetry = match &opts.telemetry {
        Some(p) => Some(TelemetryWriter::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        ))?),
        None => None,
    };

    let (inbound_tx, inbound_rx) = mpsc::channel(INBOUND_QUEUE);
    let (fanout, _) = broadcast::channel(FANOUT_BUFFER);
    let (stop, stop_rx) = watch::channel(false);

    let app = Router::new()
        .route("/", get(upgrade))
        .route("/ws", get(upgrade))
        .with_state(AppState {
            inbound: inbound_tx,
            fanout: fanout.clone(),
        });
    let mut http_stop = stop_rx.clone();
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = http_stop.wait_for(|s| *s).await;
            })
            .await
    });
    let session_loop = tokio::spawn(run_loop(
        session,
        inbound_rx,
        fanout,
        stop_rx,
        log,
        telemetry,
        opts.max_ticks,
    ));
    tracing::info!(%addr, "session server listening");
    Ok(RunningServer {
        addr,
        stop: StopHandle(Arc::new(stop)),
        session_loop,
        http,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::channel::<String>(REPLY_BUFFER);
    let mut fanout = state.fanout.subscribe();

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                r = reply_rx.recv() => match r {
                    Some(t) => t,
                    None => break,
                },
                b = fanout.recv() => match b {
                    Ok(t) => t,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::warn!(skipped = n, "client lagging; snapshots dropped");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        let frame = ClientFrame {
            text,
            reply: reply_tx.clone(),
        };
        if state.inbound.send(frame).await.is_err() {
            break;
        }
    }
    drop(reply_tx);
    writer.abort();
}

async fn run_loop(
    mut session: Session,
    mut inbound: mpsc::Receiver<ClientFrame>,
    fanout: broadcast::Sender<String>,
    mut stop: watch::Receiver<bool>,
    mut log: Option<LogWriter<BufWriter<File>>>,
    mut telemetry: Option<TelemetryWriter<BufWriter<File>>>,
    max_ticks: Option<u64>,
) -> anyhow::Result<ServeOutcome> {
    let period = Duration::from_secs_f64(1.0 / session.config().tick_rate);
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);

    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.wait_for(|s| *s) => break,
        }
        while let Ok(frame) = inbound.try_recv() {
            let (msg, replies) = session.ingest_text(&frame.text);
            if let (Some(msg), Some(log)) = (&msg, log.as_mut()) {
                log.entry(session.tick_count(), msg)?;
            }
            for reply in replies {
                let text = reply.to_json();
                if matches!(reply, OutboundMessage::Event { .. }) {
                    let _ = fanout.send(text);
                } else {
                    let _ = frame.reply.try_send(text);
                }
            }
        }
        let out = session.tick();
        if let Some(t) = telemetry.as_mut() {
            t.write(&out.record)?;
        }
        for e in out.events.iter().chain(out.snapshot.iter()) {
            let _ = fanout.send(e.to_json());
        }
        if max_ticks.is_some_and(|m| session.tick_count() >= m) {
            break;
        }
    }

    if let Some(log) = log {
        log.finish(session.tick_count())?;
    }
    if let Some(mut t) = telemetry {
        t.flush()?;
    }
    Ok(ServeOutcome {
        ticks: session.tick_count(),
        stats: session.stats(),
    })
}
