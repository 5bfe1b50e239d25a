//! On-disk run records.
//!
//! Each run lives in `<root>/<run_id>/`:
//!
//! - `manifest.json`: config snapshot, event log and artifact index, sealed at close
//! - `events.jsonl`: one session event per line, appended as they happen
//! - `metrics.jsonl`: one metrics record per line
//! - `captures/<name>.iq` and `captures/<name>.meta.json`: raw I/Q and its sidecar

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use stormbench_core::channel::SceneConfig;
use stormbench_core::metrics::{LinkConfig, MetricsRecord};
use stormbench_core::signal::IqBuffer;
use stormbench_core::{Complex, Real};

use crate::orchestrator::runtime::EventSink;
use crate::orchestrator::{SchedulePlan, SessionEvent, SimulationConfig};
use crate::registry::{Params, RegisteredWaveform};
use crate::{EngineError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CAPTURE_DIR: &str = "captures";
/// Interleaved little-endian f32 I then Q.
pub const CAPTURE_FORMAT: &str = "cf32_le";

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub registry: Vec<RegisteredWaveform>,
    /// Normalized parameters per waveform id used in the run.
    #[serde(default)]
    pub params: BTreeMap<String, Params>,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    #[serde(default)]
    pub link: Option<LinkConfig>,
    #[serde(default)]
    pub schedule: Option<SchedulePlan>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub format: String,
    pub sample_rate: f64,
    /// Stream index of the first sample.
    pub start: u64,
    pub sample_count: u64,
    /// Free-form role of the capture, e.g. `rx` or `reference`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Symbols per frame when the capture holds back-to-back frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_symbols: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureDescriptor {
    pub name: String,
    /// Paths relative to the run directory.
    pub path: String,
    pub meta_path: String,
    pub meta: CaptureMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactIndex {
    pub events: String,
    pub metrics: Option<String>,
    pub captures: Vec<CaptureDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub run_id: String,
    pub created_unix_ms: u64,
    pub closed_unix_ms: Option<u64>,
    pub sealed: bool,
    pub config: ConfigSnapshot,
    pub events: Vec<LoggedEvent>,
    pub artifacts: ArtifactIndex,
}

impl ExperimentManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub created_unix_ms: u64,
    pub sealed: bool,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatalogConfig {
    pub root: PathBuf,
    /// Cap on the total bytes of captures per run.
    pub max_capture_bytes: Option<u64>,
}

impl DatalogConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), max_capture_bytes: None }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Single-owner writer for one run.
pub struct RunHandle {
    dir: PathBuf,
    manifest: ExperimentManifest,
    events: BufWriter<File>,
    metrics: Option<BufWriter<File>>,
    capture_bytes: u64,
    max_capture_bytes: Option<u64>,
    last_sample: u64,
}

impl std::fmt::Debug for RunHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunHandle")
            .field("run_id", &self.manifest.run_id)
            .field("dir", &self.dir)
            .field("sealed", &self.manifest.sealed)
            .finish_non_exhaustive()
    }
}

/// Opens a run with a fresh id derived from the current time.
pub fn open_run(cfg: &DatalogConfig, snapshot: ConfigSnapshot) -> Result<RunHandle> {
    let created = now_ms();
    let mut id = format!("run-{created}");
    let mut n = 1;
    while cfg.root.join(&id).exists() {
        id = format!("run-{created}-{n}");
        n += 1;
    }
    open_run_with_id(cfg, &id, snapshot)
}

pub fn open_run_with_id(cfg: &DatalogConfig, run_id: &str, snapshot: ConfigSnapshot) -> Result<RunHandle> {
    if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
        return Err(EngineError::Parse(format!("'{run_id}' is not a valid run id")));
    }
    let dir = cfg.root.join(run_id);
    if dir.exists() {
        return Err(EngineError::IllegalState(format!("run '{run_id}' already exists")));
    }
    fs::create_dir_all(dir.join(CAPTURE_DIR))?;
    let events = BufWriter::new(File::create(dir.join(EVENTS_FILE))?);
    let manifest = ExperimentManifest {
        run_id: run_id.to_string(),
        created_unix_ms: now_ms(),
        closed_unix_ms: None,
        sealed: false,
        config: snapshot,
        events: Vec::new(),
        artifacts: ArtifactIndex { events: EVENTS_FILE.into(), ..Default::default() },
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest.to_json())?;
    Ok(RunHandle { dir, manifest, events, metrics: None, capture_bytes: 0, max_capture_bytes: cfg.max_capture_bytes, last_sample: 0 })
}

impl RunHandle {
    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn is_sealed(&self) -> bool {
        self.manifest.sealed
    }

    fn check_open(&self) -> Result<()> {
        if self.manifest.sealed {
            return Err(EngineError::IllegalState(format!("run '{}' is closed", self.manifest.run_id)));
        }
        Ok(())
    }

    /// Appends an event. Event sample indices must not decrease.
    pub fn append_event(&mut self, event: SessionEvent) -> Result<()> {
        self.check_open()?;
        let sample = event.sample();
        if sample < self.last_sample {
            return Err(EngineError::IllegalState(format!(
                "event at sample {sample} precedes the previous event at {}",
                self.last_sample
            )));
        }
        let logged = LoggedEvent { seq: self.manifest.events.len() as u64, event };
        serde_json::to_writer(&mut self.events, &logged)?;
        self.events.write_all(b"\n")?;
        self.events.flush()?;
        self.last_sample = sample;
        self.manifest.events.push(logged);
        Ok(())
    }

    pub fn append_metrics(&mut self, record: &MetricsRecord) -> Result<()> {
        self.check_open()?;
        if self.metrics.is_none() {
            self.metrics = Some(BufWriter::new(File::create(self.dir.join(METRICS_FILE))?));
            self.manifest.artifacts.metrics = Some(METRICS_FILE.into());
        }
        let w = self.metrics.as_mut().expect("opened above");
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Writes `buffer` as `captures/<name>.iq` plus its sidecar. A failed
    /// write is logged as an error event and returned; the run stays open.
    pub fn capture_iq<T: Real>(
        &mut self,
        name: &str,
        buffer: &IqBuffer<T>,
        kind: Option<&str>,
        frame_symbols: Option<usize>,
    ) -> Result<CaptureDescriptor> {
        self.check_open()?;
        match self.write_capture(name, buffer, kind, frame_symbols) {
            Ok(d) => {
                self.manifest.artifacts.captures.push(d.clone());
                Ok(d)
            }
            Err(e) => {
                let event = SessionEvent::Error { code: e.code().into(), message: format!("capture '{name}': {e}"), sample: self.last_sample };
                self.append_event(event)?;
                Err(e)
            }
        }
    }

    fn write_capture<T: Real>(
        &mut self,
        name: &str,
        buffer: &IqBuffer<T>,
        kind: Option<&str>,
        frame_symbols: Option<usize>,
    ) -> Result<CaptureDescriptor> {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(EngineError::Parse(format!("'{name}' is not a valid capture name")));
        }
        if self.manifest.artifacts.captures.iter().any(|c| c.name == name) {
            return Err(EngineError::IllegalState(format!("capture '{name}' already exists")));
        }
        let bytes = 8 * buffer.len() as u64;
        if let Some(cap) = self.max_capture_bytes {
            if self.capture_bytes + bytes > cap {
                return Err(EngineError::Io(std::io::Error::other(format!(
                    "capture cap of {cap} bytes exceeded ({} already written)",
                    self.capture_bytes
                ))));
            }
        }
        let path = format!("{CAPTURE_DIR}/{name}.iq");
        let meta_path = format!("{CAPTURE_DIR}/{name}.meta.json");
        let mut w = BufWriter::new(File::create(self.dir.join(&path))?);
        for s in buffer.samples() {
            w.write_all(&(s.re.as_f64() as f32).to_le_bytes())?;
            w.write_all(&(s.im.as_f64() as f32).to_le_bytes())?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        let meta = CaptureMeta {
            format: CAPTURE_FORMAT.into(),
            sample_rate: buffer.sample_rate(),
            start: buffer.start(),
            sample_count: buffer.len() as u64,
            kind: kind.map(str::to_string),
            frame_symbols,
        };
        write_json(&self.dir.join(&meta_path), &serde_json::to_string_pretty(&meta)?)?;
        self.capture_bytes += bytes;
        Ok(CaptureDescriptor { name: name.to_string(), path, meta_path, meta })
    }

    /// Seals the run: writes the final manifest. Later appends fail.
    pub fn close(&mut self) -> Result<ExperimentManifest> {
        self.check_open()?;
        self.events.flush()?;
        if let Some(m) = self.metrics.as_mut() {
            m.flush()?;
        }
        self.manifest.sealed = true;
        self.manifest.closed_unix_ms = Some(now_ms());
        write_json(&self.dir.join(MANIFEST_FILE), &self.manifest.to_json())?;
        Ok(self.manifest.clone())
    }
}

/// Shares a run between the engine loop and its owner.
#[derive(Clone)]
pub struct SharedRun(pub Arc<Mutex<RunHandle>>);

impl SharedRun {
    pub fn new(run: RunHandle) -> Self {
        Self(Arc::new(Mutex::new(run)))
    }
}

impl EventSink for SharedRun {
    fn record(&mut self, event: &SessionEvent) {
        if let Err(e) = self.0.lock().expect("run lock").append_event(event.clone()) {
            tracing::warn!("event not logged: {e}");
        }
    }
}

fn run_dir(root: &Path, run_id: &str) -> Result<PathBuf> {
    let dir = root.join(run_id);
    if run_id.contains(['/', '\\']) || run_id.starts_with('.') || !dir.join(MANIFEST_FILE).is_file() {
        return Err(EngineError::UnknownRun(run_id.to_string()));
    }
    Ok(dir)
}

/// Reads a run's manifest. An unsealed run's events come from its event log.
pub fn load_run(root: &Path, run_id: &str) -> Result<ExperimentManifest> {
    let dir = run_dir(root, run_id)?;
    let mut manifest = ExperimentManifest::from_json(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if !manifest.sealed {
        manifest.events = read_jsonl(&dir.join(EVENTS_FILE))?;
    }
    Ok(manifest)
}

pub fn load_metrics(root: &Path, run_id: &str) -> Result<Vec<MetricsRecord>> {
    let path = run_dir(root, run_id)?.join(METRICS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(&path)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// Runs under `root`, oldest first.
pub fn list_runs(root: &Path) -> Result<Vec<RunSummary>> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let mut runs = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        let Some(id) = entry.file_name().to_str().map(str::to_string) else { continue };
        if let Ok(m) = load_run(root, &id) {
            runs.push(RunSummary { run_id: m.run_id, created_unix_ms: m.created_unix_ms, sealed: m.sealed, events: m.events.len() });
        }
    }
    runs.sort_by(|a, b| (a.created_unix_ms, &a.run_id).cmp(&(b.created_unix_ms, &b.run_id)));
    Ok(runs)
}

/// Reads a capture back; the sidecar count must match the file size.
pub fn read_capture(run_dir: &Path, capture: &CaptureDescriptor) -> Result<(CaptureMeta, Vec<Complex<f32>>)> {
    let meta: CaptureMeta = serde_json::from_str(&fs::read_to_string(run_dir.join(&capture.meta_path))?)?;
    let mut bytes = Vec::new();
    File::open(run_dir.join(&capture.path))?.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != 8 * meta.sample_count {
        return Err(EngineError::Parse(format!(
            "capture '{}' has {} bytes but its sidecar declares {} samples",
            capture.name,
            bytes.len(),
            meta.sample_count
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            Complex::new(re, im)
        })
        .collect();
    Ok((meta, samples))
}
