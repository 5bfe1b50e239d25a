//! Headless link trials against scheduled interference, recorded to disk.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stormbench_core::channel::SceneConfig;
use stormbench_core::metrics::{
    compute_aser, kld_samples, run_link_trial_captured, AccessPreamble, LinkConfig, LinkTrial, MetricsRecord, WindowCapture,
};
use stormbench_core::{Complex, IqBuffer64};

use crate::binding::BuildContext;
use crate::datalog::{self, open_run, ConfigSnapshot, DatalogConfig, ExperimentManifest};
use crate::orchestrator::{Boundary, Phase, SchedulePlan, ScheduleRunner, SessionEvent, SimulationConfig};
use crate::registry::Registry;
use crate::{EngineError, Result};

fn default_reference() -> f64 {
    BuildContext::default().reference_frequency
}

/// One recorded experiment: the link under a scene, with the interference
/// transmitter following a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scene: SceneConfig,
    #[serde(default)]
    pub link: LinkConfig,
    pub schedule: SchedulePlan,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reference")]
    pub reference_frequency: f64,
    /// Also store each window's symbol samples as captures.
    #[serde(default)]
    pub capture: bool,
}

pub struct ExperimentOutcome {
    pub trial: LinkTrial,
    pub events: Vec<SessionEvent>,
    pub boundaries: Vec<Boundary>,
    pub captures: Vec<WindowCapture>,
}

/// Runs the trial for the plan's full duration. Each metrics record names
/// the waveforms that were on during its window.
pub fn run_experiment(spec: &ExperimentSpec, registry: &Registry) -> Result<ExperimentOutcome> {
    let ctx = BuildContext { sample_rate: spec.scene.sample_rate, reference_frequency: spec.reference_frequency, seed: spec.seed };
    let mut runner = ScheduleRunner::new(&spec.schedule, registry, &ctx, 0)?;
    let boundaries = runner.boundaries();
    let end = runner.end();
    let duration = spec.schedule.total_duration();
    let (mut trial, captures) = run_link_trial_captured(&spec.link, &mut runner, &spec.scene, duration, spec.seed)?;
    let events = runner.drain_events();

    let window = spec.scene.sample_rate.round() as u64;
    for r in &mut trial.records {
        let (lo, hi) = (r.timestamp, r.timestamp + window);
        for (i, b) in boundaries.iter().enumerate() {
            let stop = boundaries.get(i + 1).map_or(end, |n| n.sample);
            if b.phase != Phase::On || stop <= lo || b.sample >= hi || r.context.waveform_ids.contains(&b.waveform) {
                continue;
            }
            let gain = spec.schedule.entries[b.entry].params.get("gain").and_then(|g| g.as_f64()).or_else(|| {
                registry.get(&b.waveform).ok()?.descriptor.parameter("gain")?.default.as_f64()
            });
            r.context.waveform_ids.push(b.waveform.clone());
            r.context.gains_db.extend(gain);
        }
    }
    Ok(ExperimentOutcome { trial, events, boundaries, captures })
}

fn snapshot(spec: &ExperimentSpec, registry: &Registry) -> Result<ConfigSnapshot> {
    let mut params = std::collections::BTreeMap::new();
    for e in &spec.schedule.entries {
        params.insert(e.waveform.clone(), registry.validate_params(&e.waveform, &e.params)?);
    }
    let simulation = SimulationConfig {
        devices: Vec::new(),
        sample_rate: spec.scene.sample_rate,
        reference_frequency: spec.reference_frequency,
        ..SimulationConfig::default()
    };
    Ok(ConfigSnapshot {
        registry: registry.snapshot(),
        params,
        simulation: Some(simulation),
        scene: Some(spec.scene.clone()),
        link: Some(spec.link.clone()),
        schedule: Some(spec.schedule.clone()),
        seed: spec.seed,
    })
}

/// Runs `spec` and records it as a sealed run under `log.root`.
pub fn record_experiment(spec: &ExperimentSpec, registry: &Registry, log: &DatalogConfig) -> Result<ExperimentManifest> {
    let outcome = run_experiment(spec, registry)?;
    let mut run = open_run(log, snapshot(spec, registry)?)?;
    for e in outcome.events {
        run.append_event(e)?;
    }
    for r in &outcome.trial.records {
        run.append_metrics(r)?;
    }
    let symbol_rate = spec.link.symbol_rate;
    let sps = (spec.scene.sample_rate / symbol_rate).round() as u64;
    let captures = if spec.capture { outcome.captures } else { Vec::new() };
    for (i, c) in captures.into_iter().enumerate() {
        // captures run at the symbol rate, so `start` counts symbols
        let rx = IqBuffer64::new(c.rx, symbol_rate, c.timestamp / sps)?;
        let reference = IqBuffer64::new(c.reference, symbol_rate, c.timestamp / sps)?;
        // a failed capture is already in the event log; the run goes on
        let _ = run.capture_iq(&format!("w{i:04}_rx"), &rx, Some("rx"), Some(c.frame_symbols));
        let _ = run.capture_iq(&format!("w{i:04}_ref"), &reference, Some("reference"), Some(c.frame_symbols));
    }
    run.close()
}

/// Rebuilds the registry and spec stored in a manifest.
pub fn spec_from_manifest(manifest: &ExperimentManifest) -> Result<(ExperimentSpec, Registry)> {
    let cfg = &manifest.config;
    let missing = |what: &str| EngineError::Parse(format!("run '{}' has no {what} in its snapshot", manifest.run_id));
    let registry = Registry::new();
    for w in &cfg.registry {
        registry.register(w.descriptor.clone(), w.binding.name())?;
    }
    let spec = ExperimentSpec {
        scene: cfg.scene.clone().ok_or_else(|| missing("scene"))?,
        link: cfg.link.clone().ok_or_else(|| missing("link"))?,
        schedule: cfg.schedule.clone().ok_or_else(|| missing("schedule"))?,
        seed: cfg.seed,
        reference_frequency: cfg.simulation.as_ref().map_or_else(default_reference, |s| s.reference_frequency),
        capture: false,
    };
    Ok((spec, registry))
}

/// Re-runs a recorded experiment from its snapshot.
pub fn replay(manifest: &ExperimentManifest) -> Result<Vec<MetricsRecord>> {
    let (spec, registry) = spec_from_manifest(manifest)?;
    Ok(run_experiment(&spec, &registry)?.trial.records)
}

/// ASER and KLD of one window, recomputed from its captures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window: String,
    pub frames: usize,
    pub aser: f64,
    pub kld: Option<f64>,
}

fn widen(x: &[Complex<f32>]) -> Vec<Complex<f64>> {
    x.iter().map(|z| Complex::new(z.re as f64, z.im as f64)).collect()
}

/// Recomputes per-window metrics from a run's `rx` and `reference`
/// captures, pairing them by window name.
pub fn recompute_metrics(root: &Path, run_id: &str, link: &LinkConfig) -> Result<Vec<WindowMetrics>> {
    let manifest = datalog::load_run(root, run_id)?;
    let dir = root.join(run_id);
    let preamble = AccessPreamble::<f64>::default();
    let mut out = Vec::new();
    for c in manifest.artifacts.captures.iter().filter(|c| c.meta.kind.as_deref() == Some("rx")) {
        let window = c.name.trim_end_matches("_rx").to_string();
        let (meta, rx) = datalog::read_capture(&dir, c)?;
        let rx = widen(&rx);
        let frame = meta.frame_symbols.ok_or_else(|| EngineError::Parse(format!("capture '{}' has no frame size", c.name)))?;
        let mut aser_sum = 0.0;
        let mut frames = 0;
        for f in rx.chunks_exact(frame) {
            aser_sum += compute_aser(&f[..preamble.len()], &preamble)?;
            frames += 1;
        }
        let reference = manifest.artifacts.captures.iter().find(|r| r.name == format!("{window}_ref"));
        let kld = match reference {
            Some(r) => kld_samples(&rx, &widen(&datalog::read_capture(&dir, r)?.1), link.kld).ok(),
            None => None,
        };
        let aser = if frames == 0 { 0.0 } else { aser_sum / frames as f64 };
        out.push(WindowMetrics { window, frames, aser, kld });
    }
    Ok(out)
}
