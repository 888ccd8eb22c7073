//! HTTP front door to a running simulation.
//!
//! | method | path       | body                                   |
//! |--------|------------|----------------------------------------|
//! | POST   | `/skill`   | request envelope in, response envelope out |
//! | POST   | `/events`  | back-end event in, rule invocations out |
//! | GET    | `/state`   | simulation snapshot                    |
//! | GET    | `/metrics` | metrics of the run so far              |
//! | GET    | `/stream`  | trace records as NDJSON, `?since=seq`  |
//!
//! One lock guards the simulation, so requests are applied in a single
//! total order and no two turns of a session interleave.

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use axum::body::Body;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coassembly::backend::{BackendError, BackendEvent, RequestEnvelope};
use coassembly::dialogue::DialogueError;
use coassembly::sim::{RecordBody, Sim, TraceRecord};
use coassembly::time::SimTime;
use futures_util::stream;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

/// How simulation time relates to wall time.
#[derive(Clone, Copy, Debug)]
pub enum Clock {
    /// Time moves only when the host calls [`AppState::advance_to`].
    Manual,
    /// One simulated second per wall second since `origin`.
    Wall { origin: Instant },
}

struct Inner {
    sim: Sim,
    /// Sequence number of the next record to broadcast.
    published: u64,
}

pub struct AppState {
    inner: Mutex<Inner>,
    clock: Clock,
    tx: broadcast::Sender<TraceRecord>,
}

impl AppState {
    pub fn new(sim: Sim, clock: Clock) -> Arc<Self> {
        let (tx, _) = broadcast::channel(1024);
        let state = Arc::new(AppState {
            inner: Mutex::new(Inner { sim, published: 0 }),
            clock,
            tx,
        });
        state.lock().publish_new(&state.tx);
        state
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs `f` on the simulation after catching up with the clock, then
    /// pushes new trace records to stream subscribers.
    pub fn with_sim<T>(&self, f: impl FnOnce(&mut Sim) -> T) -> T {
        let mut inner = self.lock();
        if let Clock::Wall { origin } = self.clock {
            let t = SimTime::from_millis(origin.elapsed().as_millis() as u64);
            inner.sim.advance_to(t);
        }
        let out = f(&mut inner.sim);
        inner.publish_new(&self.tx);
        out
    }

    /// Moves simulation time forward to `t`.
    pub fn advance_to(&self, t: SimTime) {
        self.with_sim(|sim| sim.advance_to(t));
    }

    pub fn is_finished(&self) -> bool {
        self.lock().sim.is_finished()
    }

    pub fn records_since(&self, seq: u64) -> Vec<TraceRecord> {
        self.lock().sim.trace().since(seq).to_vec()
    }
}

impl Inner {
    fn publish_new(&mut self, tx: &broadcast::Sender<TraceRecord>) {
        for r in self.sim.trace().since(self.published) {
            // No subscribers is fine; late joiners replay from the trace.
            let _ = tx.send(r.clone());
        }
        self.published = self.sim.trace().records.last().map_or(0, |r| r.seq + 1);
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/skill", post(skill))
        .route("/events", post(events))
        .route("/state", get(snapshot))
        .route("/metrics", get(metrics))
        .route("/stream", get(stream_records))
        .with_state(state)
}

fn error(status: StatusCode, code: &str, detail: impl ToString) -> Response {
    (status, Json(json!({ "error": code, "detail": detail.to_string() }))).into_response()
}

async fn skill(State(state): State<Arc<AppState>>, body: String) -> Response {
    let env = match RequestEnvelope::from_json(&body) {
        Ok(env) => env,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_envelope", e),
    };
    match state.with_sim(|sim| sim.handle_envelope(&env)) {
        Ok(ex) => Json(ex.response).into_response(),
        Err(e) => {
            let (status, code) = match &e {
                BackendError::BadEnvelope(_) => (StatusCode::BAD_REQUEST, "bad_envelope"),
                BackendError::UnknownMode(_) => (StatusCode::BAD_REQUEST, "unknown_mode"),
                BackendError::SessionBusy(_) => (StatusCode::CONFLICT, "session_busy"),
                BackendError::Dialogue(DialogueError::OutOfTurn(_)) => (StatusCode::CONFLICT, "out_of_turn"),
                BackendError::Dialogue(_) => (StatusCode::UNPROCESSABLE_ENTITY, "dialogue"),
            };
            error(status, code, e)
        }
    }
}

async fn events(State(state): State<Arc<AppState>>, body: String) -> Response {
    let event: BackendEvent = match serde_json::from_str(&body) {
        Ok(e) => e,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_event", e),
    };
    Json(state.with_sim(|sim| sim.publish(event))).into_response()
}

async fn snapshot(State(state): State<Arc<AppState>>) -> Response {
    Json(state.with_sim(|sim| sim.snapshot())).into_response()
}

async fn metrics(State(state): State<Arc<AppState>>) -> Response {
    match state.with_sim(|sim| sim.metrics()) {
        Ok(m) => Json(m).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "metrics", e),
    }
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

struct Cursor {
    state: Arc<AppState>,
    rx: broadcast::Receiver<TraceRecord>,
    backlog: std::collections::VecDeque<TraceRecord>,
    next: u64,
    done: bool,
}

/// Replays the trace from `since`, then follows live records. Each line is
/// one record; sequence numbers let clients drop duplicates after a
/// reconnect. The stream closes after the run's end record.
async fn stream_records(State(state): State<Arc<AppState>>, Query(q): Query<Since>) -> Response {
    // Subscribe before reading the backlog so nothing falls in between.
    let rx = state.tx.subscribe();
    let backlog = state.records_since(q.since).into();
    let cursor = Cursor {
        state,
        rx,
        backlog,
        next: q.since,
        done: false,
    };
    let lines = stream::unfold(cursor, |mut c| async move {
        if c.done {
            return None;
        }
        loop {
            let record = match c.backlog.pop_front() {
                Some(r) => r,
                None => match c.rx.recv().await {
                    Ok(r) => r,
                    Err(broadcast::error::RecvError::Lagged(_)) => {
                        c.backlog = c.state.records_since(c.next).into();
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => return None,
                },
            };
            if record.seq < c.next {
                continue;
            }
            c.next = record.seq + 1;
            c.done = matches!(record.body, RecordBody::SimEnd { .. });
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            return Some((Ok::<_, std::convert::Infallible>(line), c));
        }
    });
    ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response()
}

/// Keeps a wall-clock simulation moving between requests.
pub async fn drive(state: Arc<AppState>, period: std::time::Duration) {
    let mut tick = tokio::time::interval(period);
    loop {
        tick.tick().await;
        if state.is_finished() {
            break;
        }
        state.with_sim(|_| ());
    }
    log::info!("simulation finished");
}

/// Serves the router on `addr` until the process is interrupted.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    if matches!(state.clock, Clock::Wall { .. }) {
        tokio::spawn(drive(state.clone(), std::time::Duration::from_millis(100)));
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
