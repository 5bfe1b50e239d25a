use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use stormbench::api::Service;
use stormbench::config::ServiceConfig;
use stormbench::power::{Battery, PowerConfig};
use stormbench::wire::SpectrumMessage;
use tower::ServiceExt;

fn service(dir: &std::path::Path, power: PowerConfig) -> Service {
    let mut cfg = ServiceConfig { run_dir: dir.into(), power, real_time: false, broadcast_capacity: 1024, ..ServiceConfig::default() };
    cfg.monitor.rate = 100.0;
    Service::new(&cfg).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn roles(app: &Router) {
    let (s, _) = call(app, "POST", "/v1/devices/n210-0/role", Some(json!({"role": "transmitter"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(app, "POST", "/v1/devices/b210-0/role", Some(json!({"role": "monitor"}))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread")]
async fn devices_and_roles() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), PowerConfig::default());
    let app = svc.router();
    let (s, v) = call(&app, "GET", "/v1/devices", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["interface"], "ethernet");
    assert_eq!(v[1]["interface"], "usb");

    roles(&app).await;
    let (s, v) = call(&app, "POST", "/v1/devices/b210-0/role", Some(json!({"role": "transmitter"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "RoleConflict");
    let (s, v) = call(&app, "POST", "/v1/devices/x/role", Some(json!({"role": "monitor"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownDevice")));
    let (s, v) = call(&app, "POST", "/v1/devices/x/role", Some(json!({"role": "captain"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("ParseError")));
    svc.shutdown().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn waveform_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), PowerConfig::default());
    let app = svc.router();
    let (_, v) = call(&app, "GET", "/v1/waveforms", None).await;
    assert_eq!(v.as_array().unwrap().len(), 9);
    let (s, form) = call(&app, "GET", "/v1/waveforms/baseline/form", None).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<_> = form["widgets"].as_array().unwrap().iter().map(|w| w["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["center_frequency", "gain", "modulation", "symbol_rate"]);
    assert_eq!(form["widgets"][2]["kind"], "dropdown");

    let descriptor = json!({
        "schema_version": 1, "waveform_name": "my_fm", "category": "narrowband", "execution_mode": "direct_graph",
        "parameters": [{"name": "gain", "kind": "float", "range": [5, 30], "units": "dB", "default": 40}]
    });
    let (s, v) = call(&app, "POST", "/v1/waveforms", Some(json!({"descriptor": descriptor, "binding": "fm"}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "ValidationReport");
    let codes: Vec<_> = v["report"]["violations"].as_array().unwrap().iter().map(|x| x["code"].as_str().unwrap()).collect();
    assert_eq!(codes, ["RangeViolation"]);

    let mut good = descriptor.clone();
    good["parameters"][0] = json!({"name": "gain", "kind": "float", "range": [5, 25], "units": "dB", "default": 10});
    let (s, v) = call(&app, "POST", "/v1/waveforms", Some(json!({"descriptor": good, "binding": "fm"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["id"], "my_fm");
    let (s, v) = call(&app, "POST", "/v1/waveforms", Some(json!({"descriptor": good, "binding": "fm"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("DuplicateError")));
    let (s, _) = call(&app, "GET", "/v1/waveforms/my_fm/form", None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&app, "GET", "/v1/waveforms/none/form", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // the registration is in the session log
    let id = svc.session_run_id();
    let (_, run) = call(&app, "GET", &format!("/v1/runs/{id}"), None).await;
    assert!(run["events"].as_array().unwrap().iter().any(|e| e["type"] == "waveform_registered" && e["waveform"] == "my_fm"));
    svc.shutdown().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), PowerConfig::default());
    let app = svc.router();
    let (s, v) = call(&app, "POST", "/v1/session/switch", Some(json!({"waveform": "ofdm"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("IllegalState")));
    let (s, _) = call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "baseline"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    roles(&app).await;
    let (s, v) = call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "baseline", "params": {"gain": 26}}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("ValidationReport")));
    let (s, v) = call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "baseline"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "Running");
    let (s, v) = call(&app, "POST", "/v1/session/switch", Some(json!({"waveform": "ofdm"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["switch"]["gap_delta"], 0.0);
    assert_eq!(v["switch"]["next_start"].as_i64().unwrap() - v["switch"]["previous_end"].as_i64().unwrap(), 1);
    let (_, v) = call(&app, "POST", "/v1/session/pause", None).await;
    assert_eq!(v["state"], "Paused");
    let (_, v) = call(&app, "POST", "/v1/session/resume", None).await;
    assert_eq!(v["state"], "Running");
    let (_, v) = call(&app, "POST", "/v1/session/stop", None).await;
    assert_eq!(v["state"], "Stopped");
    let (s, v) = call(&app, "POST", "/v1/session/stop", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("IllegalState")));

    let (s, v) = call(&app, "POST", "/v1/schedule", Some(json!({"entries": []}))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["boundaries"].as_array().unwrap().is_empty());
    let plan = json!({"entries": [{"waveform": "ofdm", "on_duration": 0.01, "off_duration": 0.01, "repeat": 2}]});
    let (s, v) = call(&app, "POST", "/v1/schedule", Some(plan)).await;
    assert_eq!(s, StatusCode::OK);
    let b: Vec<_> = v["boundaries"].as_array().unwrap().iter().map(|b| b["phase"].as_str().unwrap()).collect();
    assert_eq!(b, ["on", "off", "on", "off"]);

    let (s, v) = call(&app, "GET", "/v1/runs", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 1);
    let id = svc.session_run_id();
    let manifest = svc.shutdown().unwrap();
    assert!(manifest.sealed);
    let types: Vec<String> = manifest.events.iter().map(|e| serde_json::to_value(&e.event).unwrap()["type"].as_str().unwrap().into()).collect();
    for t in ["role_assigned", "waveform_started", "switch", "state_changed", "error"] {
        assert!(types.iter().any(|x| x == t), "{t} missing from {id}");
    }
}

#[test]
fn power_model() {
    let fresh = Battery::new(PowerConfig::default()).unwrap().status();
    assert!((fresh.estimated_runtime - 7200.0).abs() <= 1.0);
    assert_eq!(fresh.battery_fraction, 1.0);
    let mut doubled = Battery::new(PowerConfig::default()).unwrap();
    doubled.set_load(2.0 * PowerConfig::default().load_watts).unwrap();
    assert!((doubled.status().estimated_runtime - 3600.0).abs() <= 0.5);

    let mut b = Battery::new(PowerConfig::default()).unwrap();
    let mut last = b.status().battery_fraction;
    for _ in 0..10 {
        assert!(!b.drain(600.0));
        let f = b.status().battery_fraction;
        assert!(f < last);
        last = f;
    }
    assert!(b.drain(1200.0));
    assert_eq!(b.status().estimated_runtime, 0.0);
    assert!(!b.drain(1.0));

    let empty = Battery::new(PowerConfig { initial_fraction: 0.0, ..PowerConfig::default() }).unwrap();
    assert_eq!(empty.status().estimated_runtime, 0.0);
    assert!(Battery::new(PowerConfig { load_watts: 0.0, ..PowerConfig::default() }).is_err());
}

#[tokio::test(flavor = "multi_thread")]
async fn power_exhaustion_stops_the_session() {
    let dir = tempfile::tempdir().unwrap();
    // one second of charge at the default load
    let fraction = 1.0 / 7200.0;
    let svc = service(dir.path(), PowerConfig { initial_fraction: fraction, ..PowerConfig::default() });
    let app = svc.router();
    let (_, v) = call(&app, "GET", "/v1/power", None).await;
    assert!((v["estimated_runtime"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    roles(&app).await;
    let state = svc.state();
    // idle time does not drain
    state.power_tick(5.0).await.unwrap();
    assert_eq!(state.power().battery_fraction, fraction);
    call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "am"}))).await;
    let mut events = state.handle().subscribe_events();
    let p = state.power_tick(2.0).await.unwrap();
    assert_eq!(p.battery_fraction, 0.0);
    assert_eq!(p.estimated_runtime, 0.0);

    let mut saw = false;
    while let Ok(e) = events.try_recv() {
        saw |= matches!(*e, stormbench_engine::orchestrator::SessionEvent::PowerExhausted { .. });
    }
    assert!(saw);
    let (_, v) = call(&app, "GET", "/v1/session", None).await;
    assert_eq!(v["state"], "Stopped");
    let (s, _) = call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "am"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, v) = call(&app, "GET", "/v1/power", None).await;
    assert_eq!(v["estimated_runtime"], 0.0);
    svc.shutdown().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_carries_spectrum_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), PowerConfig::default());
    let app = svc.router();
    let (s, v) = call(&app, "GET", "/v1/stream", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("IllegalState")));
    roles(&app).await;

    let req = Request::builder().uri("/v1/stream").body(Body::empty()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let mut body = res.into_body();
    call(&app, "POST", "/v1/session/start", Some(json!({"waveform": "ofdm"}))).await;

    let mut text = String::new();
    let mut spectra = Vec::new();
    let mut seqs = Vec::new();
    let mut kinds = Vec::new();
    while spectra.len() < 5 {
        let frame = body.frame().await.unwrap().unwrap();
        let Ok(chunk) = frame.into_data() else { continue };
        text.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = text.find("\n\n") {
            let block: String = text.drain(..end + 2).collect();
            let mut name = "";
            let mut data = String::new();
            for line in block.lines() {
                if let Some(n) = line.strip_prefix("event:") {
                    name = n.trim();
                } else if let Some(d) = line.strip_prefix("data:") {
                    data.push_str(d.trim_start());
                }
            }
            if data.is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&data).unwrap();
            seqs.push(v["seq"].as_u64().unwrap());
            kinds.push(name.to_string());
            if name == "spectrum" {
                let m: SpectrumMessage = serde_json::from_value(v).unwrap();
                let bins = m.decode_bins().unwrap();
                assert_eq!(bins.len(), 1024);
                assert!(bins.iter().all(|b| b.is_finite() && *b >= 0.0));
                spectra.push(m);
            }
        }
    }
    assert!(seqs.windows(2).all(|w| w[1] > w[0]), "{seqs:?}");
    assert!(spectra.windows(2).all(|w| w[1].timestamp > w[0].timestamp));
    assert!(kinds.iter().any(|k| k == "event"));
    call(&app, "POST", "/v1/session/stop", None).await;
    drop(body);
    svc.shutdown().unwrap();
}
