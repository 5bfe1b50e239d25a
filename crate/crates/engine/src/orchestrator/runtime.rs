//! The orchestration loop on its own thread.
//!
//! Commands travel over an unbounded queue and are answered on a oneshot
//! channel. The loop applies every pending command between buffers, then
//! emits one buffer to the device sink (lossless) and to the broadcast
//! channels (lossy: slow subscribers lose the oldest items).

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::{Map, Value};
use stormbench_core::spectrum::SpectrumFrame;
use stormbench_core::IqBuffer64;
use tokio::sync::{broadcast, oneshot};

use super::{Boundary, Orchestrator, Role, SchedulePlan, SessionEvent, SessionState, SessionStatus, SwitchEvent, VirtualDevice};
use crate::monitor::{MonitorConfig, SpectrumStreamer};
use crate::{EngineError, Result};

#[derive(Debug, Clone)]
pub enum Command {
    Devices,
    AssignRole { device_id: String, role: Role },
    Status,
    Start { waveform: String, params: Map<String, Value> },
    Pause,
    Resume,
    Stop,
    Switch { waveform: String, params: Map<String, Value> },
    Schedule(SchedulePlan),
    /// A descriptor document and the implementation it binds to.
    Register { document: String, binding: String },
    PowerExhausted,
}

#[derive(Debug, Clone)]
pub enum Reply {
    Devices(Vec<VirtualDevice>),
    Device(VirtualDevice),
    Status(SessionStatus),
    Switch(SwitchEvent),
    Schedule(Vec<Boundary>),
    Registered(String),
}

/// Receives every transmitted buffer, in order.
pub trait DeviceSink: Send {
    fn write(&mut self, buffer: &IqBuffer64);
}

/// Discards samples.
pub struct NullSink;

impl DeviceSink for NullSink {
    fn write(&mut self, _: &IqBuffer64) {}
}

/// Receives every session event, in order.
pub trait EventSink: Send {
    fn record(&mut self, event: &SessionEvent);
}

impl<F: FnMut(&SessionEvent) + Send> EventSink for F {
    fn record(&mut self, event: &SessionEvent) {
        self(event)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RuntimeConfig {
    /// Emit buffers at the stream's sample rate instead of as fast as
    /// possible.
    pub real_time: bool,
    pub broadcast_capacity: usize,
    pub monitor: MonitorConfig,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self { real_time: true, broadcast_capacity: 64, monitor: MonitorConfig::default() }
    }
}

struct Envelope {
    command: Command,
    reply: oneshot::Sender<Result<Reply>>,
}

/// Cloneable client of a running engine loop.
#[derive(Clone)]
pub struct EngineHandle {
    commands: mpsc::Sender<Envelope>,
    samples: broadcast::Sender<Arc<IqBuffer64>>,
    spectrum: broadcast::Sender<Arc<SpectrumFrame>>,
    events: broadcast::Sender<Arc<SessionEvent>>,
    monitor_assigned: Arc<AtomicBool>,
    sample_rate: f64,
}

impl EngineHandle {
    fn envelope(&self, command: Command) -> Result<oneshot::Receiver<Result<Reply>>> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(Envelope { command, reply: tx }).map_err(|_| EngineError::Disconnected)?;
        Ok(rx)
    }

    pub async fn request(&self, command: Command) -> Result<Reply> {
        self.envelope(command)?.await.map_err(|_| EngineError::Disconnected)?
    }

    /// Blocking form of [`request`](Self::request); not for async contexts.
    pub fn request_blocking(&self, command: Command) -> Result<Reply> {
        self.envelope(command)?.blocking_recv().map_err(|_| EngineError::Disconnected)?
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn subscribe_samples(&self) -> broadcast::Receiver<Arc<IqBuffer64>> {
        self.samples.subscribe()
    }

    pub fn subscribe_events(&self) -> broadcast::Receiver<Arc<SessionEvent>> {
        self.events.subscribe()
    }

    /// Spectrum frames of the transmit stream; requires a monitor device.
    pub fn subscribe_spectrum(&self) -> Result<broadcast::Receiver<Arc<SpectrumFrame>>> {
        if !self.monitor_assigned.load(Ordering::Acquire) {
            return Err(EngineError::IllegalState("no monitor device assigned".into()));
        }
        Ok(self.spectrum.subscribe())
    }
}

/// Owns the loop thread; dropping it shuts the loop down.
pub struct Engine {
    handle: EngineHandle,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Engine {
    pub fn spawn(
        orchestrator: Orchestrator,
        config: RuntimeConfig,
        sink: Box<dyn DeviceSink>,
        event_sink: Option<Box<dyn EventSink>>,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        let cap = config.broadcast_capacity.max(1);
        let handle = EngineHandle {
            commands: tx,
            samples: broadcast::channel(cap).0,
            spectrum: broadcast::channel(cap).0,
            events: broadcast::channel(cap).0,
            monitor_assigned: Arc::new(AtomicBool::new(orchestrator.has_monitor())),
            sample_rate: orchestrator.sample_rate(),
        };
        let shutdown = Arc::new(AtomicBool::new(false));
        let state = Loop {
            shutdown: shutdown.clone(),
            streamer: SpectrumStreamer::new(config.monitor, orchestrator.sample_rate()),
            orchestrator,
            config,
            sink,
            event_sink,
            handle: handle.clone(),
            anchor: None,
        };
        let thread = std::thread::Builder::new()
            .name("stormbench-engine".into())
            .spawn(move || state.run(rx))
            .expect("spawn engine thread");
        Self { handle, shutdown, thread: Some(thread) }
    }

    pub fn handle(&self) -> EngineHandle {
        self.handle.clone()
    }

    /// Stops the loop and waits for it.
    pub fn shutdown(mut self) {
        self.join();
    }

    fn join(&mut self) {
        if let Some(t) = self.thread.take() {
            self.shutdown.store(true, Ordering::Release);
            let _ = t.join();
        }
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.join();
    }
}

struct Loop {
    shutdown: Arc<AtomicBool>,
    orchestrator: Orchestrator,
    config: RuntimeConfig,
    streamer: SpectrumStreamer,
    sink: Box<dyn DeviceSink>,
    event_sink: Option<Box<dyn EventSink>>,
    handle: EngineHandle,
    /// Wall time and stream index at which pacing started.
    anchor: Option<(Instant, u64)>,
}

impl Loop {
    fn run(mut self, rx: mpsc::Receiver<Envelope>) {
        while !self.shutdown.load(Ordering::Acquire) {
            loop {
                match rx.try_recv() {
                    Ok(env) => self.apply(env),
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => return,
                }
            }
            if self.orchestrator.state() == SessionState::Running {
                if let Some(buffer) = self.orchestrator.next_buffer() {
                    self.emit(buffer);
                }
                self.flush_events();
                self.pace();
            } else {
                self.flush_events();
                self.anchor = None;
                match rx.recv_timeout(Duration::from_millis(50)) {
                    Ok(env) => self.apply(env),
                    Err(mpsc::RecvTimeoutError::Timeout) => {}
                    Err(mpsc::RecvTimeoutError::Disconnected) => return,
                }
            }
        }
    }

    fn apply(&mut self, env: Envelope) {
        let o = &mut self.orchestrator;
        let result = match env.command {
            Command::Devices => Ok(Reply::Devices(o.discover_devices())),
            Command::AssignRole { device_id, role } => o.assign_role(&device_id, role).map(Reply::Device),
            Command::Status => Ok(Reply::Status(o.status())),
            Command::Start { waveform, params } => o.start(&waveform, &params).map(Reply::Status),
            Command::Pause => o.pause().map(Reply::Status),
            Command::Resume => o.resume().map(Reply::Status),
            Command::Stop => o.stop().map(Reply::Status),
            Command::Switch { waveform, params } => o.switch_waveform(&waveform, &params).map(Reply::Switch),
            Command::Schedule(plan) => o.run_schedule(&plan).map(Reply::Schedule),
            Command::Register { document, binding } => o.register_waveform(&document, &binding).map(Reply::Registered),
            Command::PowerExhausted => Ok(Reply::Status(o.power_exhausted())),
        };
        self.handle.monitor_assigned.store(o.has_monitor(), Ordering::Release);
        if let Err(e) = &result {
            let event = SessionEvent::Error { code: e.code().into(), message: e.to_string(), sample: o.stream_clock() };
            self.record(event);
        }
        self.flush_events();
        let _ = env.reply.send(result);
    }

    fn emit(&mut self, buffer: IqBuffer64) {
        self.sink.write(&buffer);
        match self.streamer.push(&buffer) {
            Ok(frames) => {
                for f in frames {
                    let _ = self.handle.spectrum.send(Arc::new(f));
                }
            }
            Err(e) => tracing::warn!("spectrum frame dropped: {e}"),
        }
        let _ = self.handle.samples.send(Arc::new(buffer));
    }

    fn record(&mut self, event: SessionEvent) {
        if let Some(sink) = self.event_sink.as_mut() {
            sink.record(&event);
        }
        let _ = self.handle.events.send(Arc::new(event));
    }

    fn flush_events(&mut self) {
        for e in self.orchestrator.drain_events() {
            self.record(e);
        }
    }

    fn pace(&mut self) {
        if !self.config.real_time {
            return;
        }
        let clock = self.orchestrator.stream_clock();
        let (t0, c0) = *self.anchor.get_or_insert((Instant::now(), clock));
        let due = t0 + Duration::from_secs_f64((clock - c0) as f64 / self.orchestrator.sample_rate());
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}
