use serde_json::{json, Map};
use stormbench_core::channel::SceneConfig;
use stormbench_core::metrics::LinkConfig;
use stormbench_core::{Complex, IqBuffer32, IqBuffer64};
use stormbench_engine::datalog::{
    list_runs, load_metrics, load_run, open_run, open_run_with_id, read_capture, ConfigSnapshot, DatalogConfig,
    ExperimentManifest, SharedRun,
};
use stormbench_engine::experiment::{recompute_metrics, record_experiment, replay, ExperimentSpec};
use stormbench_engine::orchestrator::{SchedulePlan, SessionEvent, SessionState};
use stormbench_engine::registry::Registry;
use stormbench_engine::orchestrator::runtime::EventSink;

fn state(sample: u64) -> SessionEvent {
    SessionEvent::StateChanged { from: SessionState::Idle, to: SessionState::Running, sample }
}

#[test]
fn empty_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatalogConfig::new(dir.path());
    let mut run = open_run(&cfg, ConfigSnapshot::default()).unwrap();
    let id = run.run_id().to_string();
    let m = run.close().unwrap();
    assert!(m.sealed && m.events.is_empty() && m.artifacts.captures.is_empty());
    assert_eq!(load_run(dir.path(), &id).unwrap(), m);
    assert!(load_metrics(dir.path(), &id).unwrap().is_empty());
    assert_eq!(list_runs(dir.path()).unwrap().len(), 1);
    assert_eq!(load_run(dir.path(), "run-0").unwrap_err().code(), "UnknownRun");
    assert_eq!(load_run(dir.path(), "../etc").unwrap_err().code(), "UnknownRun");
}

#[test]
fn events_keep_their_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatalogConfig::new(dir.path());
    let mut run = open_run_with_id(&cfg, "ordered", ConfigSnapshot::default()).unwrap();
    let events: Vec<SessionEvent> = (0..25)
        .map(|k| match k % 3 {
            0 => state(k * 10),
            1 => SessionEvent::Error { code: "X".into(), message: format!("e{k}"), sample: k * 10 },
            _ => SessionEvent::ScheduleFinished { sample: k * 10 },
        })
        .collect();
    for e in &events {
        run.append_event(e.clone()).unwrap();
    }
    // readable before close, from the event log
    let open = load_run(dir.path(), "ordered").unwrap();
    assert!(!open.sealed);
    assert_eq!(open.events.iter().map(|e| e.event.clone()).collect::<Vec<_>>(), events);

    let m = run.close().unwrap();
    let loaded = load_run(dir.path(), "ordered").unwrap();
    assert_eq!(loaded, m);
    assert_eq!(loaded.events.iter().map(|e| e.seq).collect::<Vec<_>>(), (0..25).collect::<Vec<_>>());
    assert_eq!(loaded.events.iter().map(|e| e.event.clone()).collect::<Vec<_>>(), events);
}

#[test]
fn closed_runs_reject_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatalogConfig::new(dir.path());
    let mut run = open_run(&cfg, ConfigSnapshot::default()).unwrap();
    run.append_event(state(5)).unwrap();
    assert_eq!(run.append_event(state(4)).unwrap_err().code(), "IllegalState");
    run.close().unwrap();
    assert_eq!(run.append_event(state(6)).unwrap_err().code(), "IllegalState");
    let buf = IqBuffer64::new(vec![Complex::new(1.0, 0.0)], 1.0, 0).unwrap();
    assert_eq!(run.capture_iq("late", &buf, None, None).unwrap_err().code(), "IllegalState");
    assert_eq!(run.close().unwrap_err().code(), "IllegalState");
    assert_eq!(open_run_with_id(&cfg, run.run_id(), ConfigSnapshot::default()).unwrap_err().code(), "IllegalState");
}

#[test]
fn captures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatalogConfig::new(dir.path());
    let mut run = open_run(&cfg, ConfigSnapshot::default()).unwrap();
    let n = 1237;
    let samples: Vec<Complex<f32>> = (0..n).map(|i| Complex::new((i as f32).sin() * 1e3, -(i as f32) / 7.0)).collect();
    let buf = IqBuffer32::new(samples.clone(), 2.5e5, 4096).unwrap();
    let d = run.capture_iq("tap0", &buf, Some("rx"), None).unwrap();
    let size = std::fs::metadata(run.dir().join(&d.path)).unwrap().len();
    assert_eq!(size, 8 * n as u64);
    let (meta, back) = read_capture(run.dir(), &d).unwrap();
    assert_eq!(meta.sample_count, n as u64);
    assert_eq!(meta.start, 4096);
    assert_eq!(meta.sample_rate, 2.5e5);
    assert!(back.iter().zip(&samples).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

    assert_eq!(run.capture_iq("tap0", &buf, None, None).unwrap_err().code(), "IllegalState");
    assert_eq!(run.capture_iq("../x", &buf, None, None).unwrap_err().code(), "ParseError");
    let m = run.close().unwrap();
    assert_eq!(m.artifacts.captures, vec![d]);
    assert!(m.events.iter().filter(|e| matches!(e.event, SessionEvent::Error { .. })).count() == 2);
}

#[test]
fn capture_cap_is_enforced_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatalogConfig { root: dir.path().into(), max_capture_bytes: Some(80) };
    let mut run = open_run(&cfg, ConfigSnapshot::default()).unwrap();
    let buf = IqBuffer64::new(vec![Complex::new(0.0, 1.0); 8], 1.0, 0).unwrap();
    run.capture_iq("a", &buf, None, None).unwrap();
    assert_eq!(run.capture_iq("b", &buf, None, None).unwrap_err().code(), "IoError");
    run.append_event(state(0)).unwrap();
    let m = run.close().unwrap();
    assert_eq!(m.artifacts.captures.len(), 1);
    assert_eq!(m.events.len(), 2);
}

#[test]
fn manifest_serialization_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::with_builtins();
    let snapshot = ConfigSnapshot {
        registry: registry.snapshot(),
        scene: SceneConfig::preset("scenario2"),
        link: Some(LinkConfig::default()),
        schedule: Some(SchedulePlan::duty_cycle("ofdm", Map::new(), 5.0, 5.0, 6)),
        seed: 11,
        ..ConfigSnapshot::default()
    };
    let mut run = open_run(&DatalogConfig::new(dir.path()), snapshot).unwrap();
    run.append_event(SessionEvent::WaveformStarted {
        waveform: "ofdm".into(),
        params: registry.validate_params("ofdm", &Map::new()).unwrap(),
        sample: 0,
    })
    .unwrap();
    let m = run.close().unwrap();
    let text = m.to_json();
    let again = ExperimentManifest::from_json(&text).unwrap();
    assert_eq!(again, m);
    assert_eq!(again.to_json(), text);
    assert_eq!(std::fs::read_to_string(run.dir().join("manifest.json")).unwrap(), text);
}

#[test]
fn shared_run_logs_engine_events() {
    let dir = tempfile::tempdir().unwrap();
    let run = open_run(&DatalogConfig::new(dir.path()), ConfigSnapshot::default()).unwrap();
    let mut shared = SharedRun::new(run);
    shared.record(&state(1));
    shared.record(&state(0));
    let m = shared.0.lock().unwrap().close().unwrap();
    assert_eq!(m.events.len(), 1);
}

fn experiment(capture: bool) -> ExperimentSpec {
    let schedule: SchedulePlan = serde_json::from_value(json!({"entries": [
        {"waveform": "baseline", "params": {"center_frequency": 2.45005e9}, "on_duration": 1.0, "off_duration": 1.0},
        {"waveform": "ofdm", "on_duration": 1.0, "off_duration": 1.0},
        {"waveform": "otfs", "on_duration": 1.0, "off_duration": 1.0}
    ]}))
    .unwrap();
    ExperimentSpec {
        scene: SceneConfig::preset("scenario1").unwrap(),
        link: LinkConfig::default(),
        schedule,
        seed: 3,
        reference_frequency: 2.45e9,
        capture,
    }
}

#[test]
fn scheduled_run_accounts_for_every_transition() {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::with_builtins();
    let spec = experiment(false);
    let m = record_experiment(&spec, &registry, &DatalogConfig::new(dir.path())).unwrap();
    let switches: Vec<_> = m
        .events
        .iter()
        .filter_map(|e| match &e.event {
            SessionEvent::Switch(s) => Some((s.from_waveform.clone(), s.to_waveform.clone(), s.next_start)),
            _ => None,
        })
        .collect();
    let fs = spec.scene.sample_rate as i64;
    assert_eq!(switches, [("baseline".into(), "ofdm".into(), 2 * fs), ("ofdm".into(), "otfs".into(), 4 * fs)]);
    let boundaries = m.events.iter().filter(|e| matches!(e.event, SessionEvent::ScheduleBoundary(_))).count();
    assert_eq!(boundaries, 6);

    let metrics = load_metrics(dir.path(), &m.run_id).unwrap();
    assert_eq!(metrics.len(), 6);
    for (k, r) in metrics.iter().enumerate() {
        assert_eq!(r.timestamp, k as u64 * fs as u64);
        let want: &[&str] = match k {
            0 => &["baseline"],
            2 => &["ofdm"],
            4 => &["otfs"],
            _ => &[],
        };
        assert_eq!(r.context.waveform_ids, want, "window {k}");
        assert_eq!(r.context.gains_db.len(), want.len());
    }
    assert!(m.artifacts.captures.is_empty());

    // replay reproduces the records exactly
    assert_eq!(replay(&m).unwrap(), metrics);
}

#[test]
fn captured_on_windows_diverge_more() {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::with_builtins();
    let spec = experiment(true);
    let m = record_experiment(&spec, &registry, &DatalogConfig::new(dir.path())).unwrap();
    assert_eq!(m.artifacts.captures.len(), 12);
    for c in &m.artifacts.captures {
        let size = std::fs::metadata(dir.path().join(&m.run_id).join(&c.path)).unwrap().len();
        assert_eq!(size, 8 * c.meta.sample_count);
    }
    let windows = recompute_metrics(dir.path(), &m.run_id, &spec.link).unwrap();
    assert_eq!(windows.len(), 6);
    let kld = |i: usize| windows[i].kld.unwrap();
    // wideband windows against the following silent window
    for on in [2, 4] {
        assert!(kld(on) > kld(on + 1), "window {on}: {} vs {}", kld(on), kld(on + 1));
        assert!(windows[on].aser > windows[on + 1].aser);
    }
    let records = load_metrics(dir.path(), &m.run_id).unwrap();
    for (w, r) in windows.iter().zip(&records) {
        assert!((w.aser - r.aser).abs() < 0.02, "{} vs {}", w.aser, r.aser);
    }
}
