use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stormbench_core::waveform::SampleSource;
use stormbench_core::Complex;

use super::{SessionEvent, SwitchEvent};
use crate::binding::{build_source, BuildContext};
use crate::registry::{Params, Registry};
use crate::{EngineError, Result};

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub waveform: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    /// Seconds of transmission per cycle.
    pub on_duration: f64,
    /// Seconds of silence per cycle.
    pub off_duration: f64,
    #[serde(default = "one")]
    pub repeat: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub entries: Vec<ScheduleEntry>,
}

impl SchedulePlan {
    /// `repeat` on/off cycles of one waveform.
    pub fn duty_cycle(waveform: &str, params: Map<String, Value>, on: f64, off: f64, repeat: u32) -> Self {
        Self { entries: vec![ScheduleEntry { waveform: waveform.into(), params, on_duration: on, off_duration: off, repeat }] }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            let ok = |d: f64| d.is_finite() && d > 0.0;
            if !ok(e.on_duration) || !ok(e.off_duration) {
                return Err(EngineError::Parse(format!("entry {i}: durations must be positive and finite")));
            }
            if e.repeat == 0 {
                return Err(EngineError::Parse(format!("entry {i}: repeat must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.entries.iter().map(|e| (e.on_duration + e.off_duration) * e.repeat as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    On,
    Off,
}

/// Start of an on or off window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub entry: usize,
    pub repetition: u32,
    pub phase: Phase,
    pub waveform: String,
    pub sample: u64,
    pub time: f64,
}

struct Segment {
    boundary: Boundary,
    len: u64,
}

struct Resolved {
    id: String,
    params: Params,
    source: Box<dyn SampleSource<f64>>,
}

/// Plays a schedule plan as a sample stream: each entry's generator runs
/// during its on windows and holds still during off windows, which are
/// zeros. Everything after the plan is zeros too.
pub struct ScheduleRunner {
    entries: Vec<Resolved>,
    segments: Vec<Segment>,
    sample_rate: f64,
    position: u64,
    next_segment: usize,
    current: Option<usize>,
    events: Vec<SessionEvent>,
}

impl ScheduleRunner {
    /// Resolves every entry up front, so a bad plan fails before any sample
    /// is produced. Entry `i` is seeded with `ctx.seed + i`; boundaries are
    /// sample indices counted from `origin`.
    pub fn new(plan: &SchedulePlan, registry: &Registry, ctx: &BuildContext, origin: u64) -> Result<Self> {
        plan.validate()?;
        let fs = ctx.sample_rate;
        let mut entries = Vec::with_capacity(plan.entries.len());
        for (i, e) in plan.entries.iter().enumerate() {
            let w = registry.get(&e.waveform)?;
            let params = registry.validate_params(&e.waveform, &e.params)?;
            let ctx = BuildContext { seed: ctx.seed.wrapping_add(i as u64), ..*ctx };
            let source = build_source(w.binding, w.descriptor.execution_mode, &params, &ctx)?;
            entries.push(Resolved { id: w.id.clone(), params, source });
        }

        let mut segments = Vec::new();
        let mut elapsed = 0.0;
        let mut start = origin;
        for (i, e) in plan.entries.iter().enumerate() {
            for rep in 0..e.repeat {
                for (phase, d) in [(Phase::On, e.on_duration), (Phase::Off, e.off_duration)] {
                    elapsed += d;
                    // cumulative rounding keeps every boundary within half a
                    // sample of its scheduled time
                    let end = origin + (elapsed * fs).round() as u64;
                    let boundary =
                        Boundary { entry: i, repetition: rep, phase, waveform: e.waveform.clone(), sample: start, time: start as f64 / fs };
                    segments.push(Segment { boundary, len: end - start });
                    start = end;
                }
            }
        }
        Ok(Self { entries, segments, sample_rate: fs, position: origin, next_segment: 0, current: None, events: Vec::new() })
    }

    /// Planned window starts, in order.
    pub fn boundaries(&self) -> Vec<Boundary> {
        self.segments.iter().map(|s| s.boundary.clone()).collect()
    }

    pub fn end(&self) -> u64 {
        self.segments.last().map_or(self.position, |s| s.boundary.sample + s.len)
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn finished(&self) -> bool {
        self.position >= self.end()
    }

    /// Samples left in the plan.
    pub fn remaining(&self) -> u64 {
        self.end().saturating_sub(self.position)
    }

    /// Waveform id and parameters of the entry currently playing.
    pub fn active(&self) -> Option<(&str, &Params)> {
        self.current.map(|i| (self.entries[i].id.as_str(), &self.entries[i].params))
    }

    /// Events produced since the last call.
    pub fn drain_events(&mut self) -> Vec<SessionEvent> {
        std::mem::take(&mut self.events)
    }

    fn finished_within(&self, take: usize) -> bool {
        !self.segments.is_empty() && self.position < self.end() && self.position + take as u64 >= self.end()
    }

    fn enter_segment(&mut self) {
        let seg = &self.segments[self.next_segment];
        let b = seg.boundary.clone();
        if self.current != Some(b.entry) {
            let entry = &self.entries[b.entry];
            match self.current {
                Some(prev) => {
                    self.events.push(SessionEvent::Switch(SwitchEvent::at(
                        &self.entries[prev].id,
                        &entry.id,
                        b.sample,
                        self.sample_rate,
                    )));
                }
                None => self.events.push(SessionEvent::WaveformStarted {
                    waveform: entry.id.clone(),
                    params: entry.params.clone(),
                    sample: b.sample,
                }),
            }
            self.current = Some(b.entry);
        }
        self.events.push(SessionEvent::ScheduleBoundary(b));
        self.next_segment += 1;
    }
}

impl SampleSource<f64> for ScheduleRunner {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<f64>]) {
        let mut done = 0;
        while done < out.len() {
            while self.next_segment < self.segments.len() && self.segments[self.next_segment].boundary.sample <= self.position {
                self.enter_segment();
            }
            let seg = self.next_segment.checked_sub(1).map(|i| &self.segments[i]);
            let (limit, on) = match seg {
                Some(s) if self.position < s.boundary.sample + s.len => (s.boundary.sample + s.len, s.boundary.phase == Phase::On),
                _ => (u64::MAX, false),
            };
            let take = ((limit - self.position).min((out.len() - done) as u64)) as usize;
            let chunk = &mut out[done..done + take];
            if on {
                self.entries[self.current.expect("on window has an entry")].source.fill(chunk);
            } else {
                chunk.fill(Complex::new(0.0, 0.0));
            }
            if self.finished_within(take) {
                self.events.push(SessionEvent::ScheduleFinished { sample: self.end() });
            }
            done += take;
            self.position += take as u64;
        }
    }
}
