//! HTTP control API.
//!
//! Reads go straight to the registry and run directory; every mutation is
//! a command on the engine queue. Errors are JSON bodies with a stable
//! `code`, plus the full report for validation failures.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stormbench_engine::datalog::{self, open_run, ConfigSnapshot, DatalogConfig, ExperimentManifest, RunSummary, SharedRun};
use stormbench_engine::orchestrator::runtime::{Command, Engine, EngineHandle, NullSink, Reply, RuntimeConfig};
use stormbench_engine::orchestrator::{
    Boundary, Orchestrator, Role, SchedulePlan, SessionState, SessionStatus, SwitchEvent, VirtualDevice,
};
use stormbench_engine::registry::{FormSpec, RegisteredWaveform, Registry, ValidationReport};
use stormbench_engine::EngineError;
use tokio::sync::{broadcast, mpsc, watch};

use crate::config::ServiceConfig;
use crate::power::{Battery, PowerStatus};
use crate::wire::{self, EventMessage, PowerMessage, SpectrumMessage};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, body: ErrorBody { code: "ParseError".into(), message: message.into(), report: None } }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::IllegalState(_) | EngineError::RoleConflict(_) | EngineError::Duplicate(_) => StatusCode::CONFLICT,
            EngineError::Validation(_) | EngineError::Compatibility(_) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::UnknownWaveform(_) | EngineError::UnknownDevice(_) | EngineError::UnknownRun(_) => {
                StatusCode::NOT_FOUND
            }
            EngineError::Parse(_) | EngineError::Dsp(_) => StatusCode::BAD_REQUEST,
            EngineError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            EngineError::Disconnected => StatusCode::SERVICE_UNAVAILABLE,
        };
        let report = match &e {
            EngineError::Validation(r) => Some(r.clone()),
            _ => None,
        };
        Self { status, body: ErrorBody { code: e.code().into(), message: e.to_string(), report } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn unexpected(reply: Reply) -> ApiError {
    ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        body: ErrorBody { code: "Internal".into(), message: format!("unexpected reply {reply:?}"), report: None },
    }
}

/// Shared by every handler.
#[derive(Clone)]
pub struct AppState {
    handle: EngineHandle,
    registry: Arc<Registry>,
    battery: Arc<Mutex<Battery>>,
    power_updates: broadcast::Sender<PowerStatus>,
    run_dir: PathBuf,
    /// Flips to true when the server shuts down; ends open streams.
    closing: watch::Sender<bool>,
}

impl AppState {
    pub fn handle(&self) -> &EngineHandle {
        &self.handle
    }

    pub fn power(&self) -> PowerStatus {
        self.battery.lock().expect("battery lock").status()
    }

    async fn request(&self, command: Command) -> Result<Reply, ApiError> {
        Ok(self.handle.request(command).await?)
    }

    async fn status(&self) -> Result<SessionStatus, ApiError> {
        match self.request(Command::Status).await? {
            Reply::Status(s) => Ok(s),
            r => Err(unexpected(r)),
        }
    }

    /// Advances the battery by `seconds` of wall time. It drains only while
    /// a session runs; on reaching empty the engine is told, which logs the
    /// event and stops the session.
    pub async fn power_tick(&self, seconds: f64) -> Result<PowerStatus, EngineError> {
        let running = matches!(self.handle.request(Command::Status).await?, Reply::Status(s) if s.state == SessionState::Running);
        let (emptied, status) = {
            let mut b = self.battery.lock().expect("battery lock");
            let emptied = running && b.drain(seconds);
            (emptied, b.status())
        };
        if emptied {
            self.handle.request(Command::PowerExhausted).await?;
        }
        let _ = self.power_updates.send(status);
        Ok(status)
    }
}

/// The engine, its API state and the session's run log.
pub struct Service {
    state: AppState,
    engine: Option<Engine>,
    run: SharedRun,
}

impl Service {
    pub fn new(cfg: &ServiceConfig) -> anyhow::Result<Self> {
        let registry = Arc::new(Registry::with_builtins());
        let orchestrator = Orchestrator::new(registry.clone(), cfg.simulation.clone())?;
        let battery = Battery::new(cfg.power)?;
        let snapshot = ConfigSnapshot {
            registry: registry.snapshot(),
            simulation: Some(cfg.simulation.clone()),
            seed: cfg.simulation.seed,
            ..ConfigSnapshot::default()
        };
        let run = SharedRun::new(open_run(&DatalogConfig::new(&cfg.run_dir), snapshot)?);
        let runtime = RuntimeConfig { real_time: cfg.real_time, broadcast_capacity: cfg.broadcast_capacity, monitor: cfg.monitor };
        let engine = Engine::spawn(orchestrator, runtime, Box::new(NullSink), Some(Box::new(run.clone())));
        let state = AppState {
            handle: engine.handle(),
            registry,
            battery: Arc::new(Mutex::new(battery)),
            power_updates: broadcast::channel(16).0,
            run_dir: cfg.run_dir.clone(),
            closing: watch::channel(false).0,
        };
        Ok(Self { state, engine: Some(engine), run })
    }

    pub fn state(&self) -> AppState {
        self.state.clone()
    }

    pub fn session_run_id(&self) -> String {
        self.run.0.lock().expect("run lock").run_id().to_string()
    }

    pub fn router(&self) -> Router {
        router(self.state.clone())
    }

    /// Stops the engine and seals the session's run.
    pub fn shutdown(mut self) -> anyhow::Result<ExperimentManifest> {
        if let Some(engine) = self.engine.take() {
            engine.shutdown();
        }
        Ok(self.run.0.lock().expect("run lock").close()?)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/devices", get(devices))
        .route("/v1/devices/{id}/role", post(assign_role))
        .route("/v1/waveforms", get(waveforms).post(register))
        .route("/v1/waveforms/{id}", get(waveform))
        .route("/v1/waveforms/{id}/form", get(form))
        .route("/v1/session", get(session))
        .route("/v1/session/start", post(start))
        .route("/v1/session/pause", post(pause))
        .route("/v1/session/resume", post(resume))
        .route("/v1/session/stop", post(stop))
        .route("/v1/session/switch", post(switch))
        .route("/v1/schedule", post(schedule))
        .route("/v1/power", get(power))
        .route("/v1/runs", get(runs))
        .route("/v1/runs/{id}", get(run))
        .route("/v1/stream", get(stream))
        .with_state(state)
}

async fn devices(State(s): State<AppState>) -> ApiResult<Vec<VirtualDevice>> {
    match s.request(Command::Devices).await? {
        Reply::Devices(d) => Ok(Json(d)),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoleRequest {
    pub role: Role,
}

async fn assign_role(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<VirtualDevice> {
    let req: RoleRequest = parse(&body)?;
    match s.request(Command::AssignRole { device_id: id, role: req.role }).await? {
        Reply::Device(d) => Ok(Json(d)),
        r => Err(unexpected(r)),
    }
}

async fn waveforms(State(s): State<AppState>) -> Json<Vec<RegisteredWaveform>> {
    Json(s.registry.snapshot())
}

async fn waveform(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<RegisteredWaveform> {
    Ok(Json((*s.registry.get(&id)?).clone()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub descriptor: Value,
    /// Name of the implementation the descriptor binds to.
    pub binding: String,
}

async fn register(State(s): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<RegisteredWaveform>), ApiError> {
    let req: RegisterRequest = parse(&body)?;
    let command = Command::Register { document: req.descriptor.to_string(), binding: req.binding };
    match s.request(command).await? {
        Reply::Registered(id) => Ok((StatusCode::CREATED, Json((*s.registry.get(&id)?).clone()))),
        r => Err(unexpected(r)),
    }
}

async fn form(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<FormSpec> {
    Ok(Json(s.registry.form_spec(&id)?))
}

async fn session(State(s): State<AppState>) -> ApiResult<SessionStatus> {
    Ok(Json(s.status().await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WaveformRequest {
    pub waveform: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

async fn lifecycle(s: &AppState, command: Command) -> ApiResult<SessionStatus> {
    match s.request(command).await? {
        Reply::Status(st) => Ok(Json(st)),
        r => Err(unexpected(r)),
    }
}

async fn start(State(s): State<AppState>, body: Bytes) -> ApiResult<SessionStatus> {
    let req: WaveformRequest = parse(&body)?;
    if s.battery.lock().expect("battery lock").is_exhausted() {
        return Err(EngineError::IllegalState("battery exhausted".into()).into());
    }
    lifecycle(&s, Command::Start { waveform: req.waveform, params: req.params }).await
}

async fn pause(State(s): State<AppState>) -> ApiResult<SessionStatus> {
    lifecycle(&s, Command::Pause).await
}

async fn resume(State(s): State<AppState>) -> ApiResult<SessionStatus> {
    lifecycle(&s, Command::Resume).await
}

async fn stop(State(s): State<AppState>) -> ApiResult<SessionStatus> {
    lifecycle(&s, Command::Stop).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwitchResponse {
    pub state: SessionState,
    pub switch: SwitchEvent,
}

async fn switch(State(s): State<AppState>, body: Bytes) -> ApiResult<SwitchResponse> {
    let req: WaveformRequest = parse(&body)?;
    match s.request(Command::Switch { waveform: req.waveform, params: req.params }).await? {
        Reply::Switch(e) => Ok(Json(SwitchResponse { state: SessionState::Running, switch: e })),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduleResponse {
    pub status: SessionStatus,
    pub boundaries: Vec<Boundary>,
}

async fn schedule(State(s): State<AppState>, body: Bytes) -> ApiResult<ScheduleResponse> {
    let plan: SchedulePlan = parse(&body)?;
    if !plan.entries.is_empty() && s.battery.lock().expect("battery lock").is_exhausted() {
        return Err(EngineError::IllegalState("battery exhausted".into()).into());
    }
    let boundaries = match s.request(Command::Schedule(plan)).await? {
        Reply::Schedule(b) => b,
        r => return Err(unexpected(r)),
    };
    Ok(Json(ScheduleResponse { status: s.status().await?, boundaries }))
}

async fn power(State(s): State<AppState>) -> Json<PowerStatus> {
    Json(s.power())
}

async fn runs(State(s): State<AppState>) -> ApiResult<Vec<RunSummary>> {
    Ok(Json(datalog::list_runs(&s.run_dir)?))
}

async fn run(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<ExperimentManifest> {
    Ok(Json(datalog::load_run(&s.run_dir, &id)?))
}

fn sse<T: Serialize>(name: &str, body: &T) -> Event {
    Event::default().event(name).json_data(body).expect("stream messages serialize")
}

/// Spectrum frames, session events and power updates for one subscriber.
/// Each subscriber drops its own oldest items when it falls behind.
async fn stream(State(s): State<AppState>) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let mut spectrum = s.handle.subscribe_spectrum()?;
    let mut events = s.handle.subscribe_events();
    let mut power = s.power_updates.subscribe();
    let mut closing = s.closing.subscribe();
    let (tx, rx) = mpsc::channel::<Event>(64);
    tokio::spawn(async move {
        let mut seq = 0u64;
        loop {
            let event = tokio::select! {
                _ = closing.wait_for(|c| *c) => break,
                r = spectrum.recv() => match r {
                    Ok(f) => sse(wire::SPECTRUM, &SpectrumMessage::encode(seq, &f)),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = events.recv() => match r {
                    Ok(e) => sse(wire::EVENT, &EventMessage { seq, event: (*e).clone() }),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = power.recv() => match r {
                    Ok(p) => sse(wire::POWER, &PowerMessage { seq, status: p }),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            seq += 1;
            if tx.send(event).await.is_err() {
                break;
            }
        }
    });
    let out = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) });
    Ok(Sse::new(out).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// Binds, serves until ctrl-c or SIGTERM, then seals the session run.
pub async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(&cfg.bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {}: {e}", cfg.bind))?;
    let service = Service::new(&cfg)?;
    tracing::info!("listening on {}, session run {}", listener.local_addr()?, service.session_run_id());

    let closing = service.state().closing.clone();
    let state = service.state();
    let ticker = tokio::spawn(async move {
        let period = Duration::from_secs(1);
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        interval.tick().await;
        if state.power().battery_fraction <= 0.0 {
            let _ = state.handle.request(Command::PowerExhausted).await;
        }
        loop {
            interval.tick().await;
            if state.power_tick(period.as_secs_f64()).await.is_err() {
                break;
            }
        }
    });

    axum::serve(listener, service.router())
        .with_graceful_shutdown(async move {
            shutdown_signal().await;
            tracing::info!("shutting down");
            closing.send_replace(true);
        })
        .await?;
    ticker.abort();
    let manifest = tokio::task::spawn_blocking(move || service.shutdown()).await??;
    tracing::info!("sealed run {}", manifest.run_id);
    Ok(())
}
