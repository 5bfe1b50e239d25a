//! Session control: device roles, the start/pause/resume/stop lifecycle,
//! sample-exact waveform switching and duty-cycled schedules.
//!
//! [`Orchestrator`] is the synchronous state machine. Commands apply between
//! buffers, so a switch lands exactly on a buffer boundary and the stream
//! clock never skips. [`runtime`] runs it on a dedicated thread behind a
//! command queue.

mod device;
pub mod runtime;
mod schedule;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stormbench_core::waveform::SampleSource;
use stormbench_core::{Complex, IqBuffer64};

use crate::binding::build_source;
use crate::registry::{Params, Registry};
use crate::{EngineError, Result};

pub use device::{Capabilities, DeviceProfile, Interface, Role, SimulationConfig, VirtualDevice};
pub use schedule::{Boundary, Phase, ScheduleEntry, SchedulePlan, ScheduleRunner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Idle,
    Running,
    Paused,
    Stopped,
}

/// Splice record for a waveform change. Indices are stream sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub from_waveform: String,
    pub to_waveform: String,
    /// Last sample of the outgoing waveform; -1 if nothing was emitted yet.
    pub previous_end: i64,
    pub previous_end_time: f64,
    pub next_start: i64,
    pub next_start_time: f64,
    /// Seconds between the two samples beyond one sample period, floored at 0.
    pub gap_delta: f64,
    pub sample_rate: f64,
}

impl SwitchEvent {
    /// A splice whose new waveform starts at `next_start`.
    pub fn at(from: &str, to: &str, next_start: u64, sample_rate: f64) -> Self {
        let next = next_start as i64;
        let prev = next - 1;
        Self {
            from_waveform: from.to_string(),
            to_waveform: to.to_string(),
            previous_end: prev,
            previous_end_time: prev as f64 / sample_rate,
            next_start: next,
            next_start_time: next as f64 / sample_rate,
            gap_delta: ((next - prev - 1) as f64 / sample_rate).max(0.0),
            sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    StateChanged { from: SessionState, to: SessionState, sample: u64 },
    RoleAssigned { device_id: String, role: Role, sample: u64 },
    WaveformStarted { waveform: String, params: Params, sample: u64 },
    Switch(SwitchEvent),
    ScheduleBoundary(Boundary),
    ScheduleFinished { sample: u64 },
    WaveformRegistered { waveform: String, binding: String, sample: u64 },
    PowerExhausted { sample: u64 },
    Error { code: String, message: String, sample: u64 },
}

impl SessionEvent {
    /// Stream index the event refers to.
    pub fn sample(&self) -> u64 {
        match self {
            SessionEvent::StateChanged { sample, .. }
            | SessionEvent::RoleAssigned { sample, .. }
            | SessionEvent::WaveformStarted { sample, .. }
            | SessionEvent::ScheduleFinished { sample }
            | SessionEvent::WaveformRegistered { sample, .. }
            | SessionEvent::PowerExhausted { sample }
            | SessionEvent::Error { sample, .. } => *sample,
            SessionEvent::Switch(s) => s.next_start.max(0) as u64,
            SessionEvent::ScheduleBoundary(b) => b.sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub state: SessionState,
    pub active_waveform: Option<String>,
    pub stream_clock: u64,
    pub scheduled: bool,
}

struct Active {
    id: String,
    source: Box<dyn SampleSource<f64>>,
}

enum Program {
    Manual(Active),
    Schedule(Box<ScheduleRunner>),
}

pub struct Orchestrator {
    registry: Arc<Registry>,
    config: SimulationConfig,
    devices: Vec<VirtualDevice>,
    state: SessionState,
    clock: u64,
    program: Option<Program>,
    builds: u64,
    events: Vec<SessionEvent>,
}

impl Orchestrator {
    pub fn new(registry: Arc<Registry>, config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let devices = config.devices.iter().map(VirtualDevice::from).collect();
        Ok(Self { registry, config, devices, state: SessionState::Idle, clock: 0, program: None, builds: 0, events: Vec::new() })
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> f64 {
        self.config.sample_rate
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn stream_clock(&self) -> u64 {
        self.clock
    }

    pub fn status(&self) -> SessionStatus {
        let (active_waveform, scheduled) = match &self.program {
            Some(Program::Manual(a)) => (Some(a.id.clone()), false),
            Some(Program::Schedule(r)) => (r.active().map(|(id, _)| id.to_string()), true),
            None => (None, false),
        };
        SessionStatus { state: self.state, active_waveform, stream_clock: self.clock, scheduled }
    }

    /// The configured devices with their current roles.
    pub fn discover_devices(&self) -> Vec<VirtualDevice> {
        self.devices.clone()
    }

    fn device_with(&self, role: Role) -> Option<&VirtualDevice> {
        self.devices.iter().find(|d| d.role == role)
    }

    pub fn has_monitor(&self) -> bool {
        self.device_with(Role::Monitor).is_some()
    }

    pub fn assign_role(&mut self, device_id: &str, role: Role) -> Result<VirtualDevice> {
        if matches!(self.state, SessionState::Running | SessionState::Paused) {
            return Err(EngineError::IllegalState(format!("roles are fixed while the session is {:?}", self.state)));
        }
        let idx = self
            .devices
            .iter()
            .position(|d| d.device_id == device_id)
            .ok_or_else(|| EngineError::UnknownDevice(device_id.to_string()))?;
        if role != Role::Unassigned {
            if let Some(other) = self.devices.iter().find(|d| d.role == role && d.device_id != device_id) {
                return Err(EngineError::RoleConflict(format!("{} is already the {role:?}", other.device_id)));
            }
        }
        self.devices[idx].role = role;
        self.events.push(SessionEvent::RoleAssigned { device_id: device_id.to_string(), role, sample: self.clock });
        Ok(self.devices[idx].clone())
    }

    fn transition(&mut self, to: SessionState) -> SessionStatus {
        let from = self.state;
        self.state = to;
        self.events.push(SessionEvent::StateChanged { from, to, sample: self.clock });
        self.status()
    }

    fn illegal(&self, op: &str) -> EngineError {
        EngineError::IllegalState(format!("cannot {op} while {:?}", self.state))
    }

    fn check_startable(&self) -> Result<()> {
        if !matches!(self.state, SessionState::Idle | SessionState::Stopped) {
            return Err(self.illegal("start"));
        }
        let tx = self
            .device_with(Role::Transmitter)
            .ok_or_else(|| EngineError::IllegalState("no transmitter assigned".into()))?;
        if self.device_with(Role::Monitor).is_none() {
            return Err(EngineError::IllegalState("no monitor assigned".into()));
        }
        if self.config.sample_rate > tx.capabilities.max_sample_rate {
            return Err(EngineError::Compatibility(format!(
                "{} supports at most {} samples/s",
                tx.device_id, tx.capabilities.max_sample_rate
            )));
        }
        Ok(())
    }

    fn check_tunable(&self, params: &Params) -> Result<()> {
        let Some(cf) = params.get("center_frequency").and_then(|v| v.as_f64()) else { return Ok(()) };
        let tx = self.device_with(Role::Transmitter).expect("checked by caller");
        let c = tx.capabilities;
        if !(c.min_frequency..=c.max_frequency).contains(&cf) {
            return Err(EngineError::Compatibility(format!(
                "{} tunes {}..{} Hz, not {cf} Hz",
                tx.device_id, c.min_frequency, c.max_frequency
            )));
        }
        Ok(())
    }

    fn build(&mut self, id: &str, values: &Map<String, Value>) -> Result<(Active, Params)> {
        let w = self.registry.get(id)?;
        let params = self.registry.validate_params(id, values)?;
        self.check_tunable(&params)?;
        let ctx = self.config.build_context(self.config.seed.wrapping_add(self.builds));
        let source = build_source(w.binding, w.descriptor.execution_mode, &params, &ctx)?;
        self.builds += 1;
        Ok((Active { id: w.id.clone(), source }, params))
    }

    pub fn start(&mut self, id: &str, values: &Map<String, Value>) -> Result<SessionStatus> {
        self.check_startable()?;
        let (active, params) = self.build(id, values)?;
        self.events.push(SessionEvent::WaveformStarted { waveform: active.id.clone(), params, sample: self.clock });
        self.program = Some(Program::Manual(active));
        Ok(self.transition(SessionState::Running))
    }

    pub fn pause(&mut self) -> Result<SessionStatus> {
        if self.state != SessionState::Running {
            return Err(self.illegal("pause"));
        }
        Ok(self.transition(SessionState::Paused))
    }

    pub fn resume(&mut self) -> Result<SessionStatus> {
        if self.state != SessionState::Paused {
            return Err(self.illegal("resume"));
        }
        Ok(self.transition(SessionState::Running))
    }

    pub fn stop(&mut self) -> Result<SessionStatus> {
        if !matches!(self.state, SessionState::Running | SessionState::Paused) {
            return Err(self.illegal("stop"));
        }
        self.program = None;
        Ok(self.transition(SessionState::Stopped))
    }

    /// Replaces the running waveform from the next sample on. The new
    /// waveform gets a fresh generator.
    pub fn switch_waveform(&mut self, id: &str, values: &Map<String, Value>) -> Result<SwitchEvent> {
        if self.state != SessionState::Running {
            return Err(self.illegal("switch"));
        }
        let from = match &self.program {
            Some(Program::Manual(a)) => a.id.clone(),
            _ => return Err(EngineError::IllegalState("a schedule owns the stream".into())),
        };
        let (active, params) = self.build(id, values)?;
        let event = SwitchEvent::at(&from, &active.id, self.clock, self.config.sample_rate);
        self.events.push(SessionEvent::Switch(event.clone()));
        self.events.push(SessionEvent::WaveformStarted { waveform: active.id.clone(), params, sample: self.clock });
        self.program = Some(Program::Manual(active));
        Ok(event)
    }

    /// Starts `plan` at the current stream index and returns its planned
    /// window boundaries. An empty plan does nothing.
    pub fn run_schedule(&mut self, plan: &SchedulePlan) -> Result<Vec<Boundary>> {
        if matches!(self.state, SessionState::Running | SessionState::Paused) {
            return Err(self.illegal("schedule"));
        }
        if plan.entries.is_empty() {
            plan.validate()?;
            return Ok(Vec::new());
        }
        self.check_startable()?;
        for e in &plan.entries {
            self.check_tunable(&self.registry.validate_params(&e.waveform, &e.params)?)?;
        }
        let ctx = self.config.build_context(self.config.seed.wrapping_add(self.builds));
        let runner = ScheduleRunner::new(plan, &self.registry, &ctx, self.clock)?;
        self.builds += plan.entries.len() as u64;
        let boundaries = runner.boundaries();
        self.program = Some(Program::Schedule(Box::new(runner)));
        self.transition(SessionState::Running);
        Ok(boundaries)
    }

    /// Emits the next buffer while running; `None` otherwise. A schedule's
    /// last buffer is cut at the plan end, after which the session stops.
    pub fn next_buffer(&mut self) -> Option<IqBuffer64> {
        if self.state != SessionState::Running {
            return None;
        }
        let mut len = self.config.buffer_size;
        let mut samples;
        let mut finished = false;
        match self.program.as_mut()? {
            Program::Manual(a) => {
                samples = vec![Complex::new(0.0, 0.0); len];
                a.source.fill(&mut samples);
            }
            Program::Schedule(r) => {
                len = len.min(r.remaining() as usize);
                samples = vec![Complex::new(0.0, 0.0); len];
                r.fill(&mut samples);
                self.events.extend(r.drain_events());
                finished = r.finished();
            }
        }
        let buffer = IqBuffer64::new(samples, self.config.sample_rate, self.clock).expect("rate validated");
        self.clock += len as u64;
        if finished {
            self.program = None;
            self.transition(SessionState::Stopped);
        }
        Some(buffer)
    }

    /// Validates `document` and registers it against `binding`.
    pub fn register_waveform(&mut self, document: &str, binding: &str) -> Result<String> {
        let id = self.registry.register_document(document, binding)?;
        self.events.push(SessionEvent::WaveformRegistered { waveform: id.clone(), binding: binding.to_string(), sample: self.clock });
        Ok(id)
    }

    /// The power supply is empty: logs it and stops any active session.
    pub fn power_exhausted(&mut self) -> SessionStatus {
        self.events.push(SessionEvent::PowerExhausted { sample: self.clock });
        if matches!(self.state, SessionState::Running | SessionState::Paused) {
            self.program = None;
            self.transition(SessionState::Stopped);
        }
        self.status()
    }

    /// Events produced since the last call, in order.
    pub fn drain_events(&mut self) -> Vec<SessionEvent> {
        std::mem::take(&mut self.events)
    }
}
