//! Headless commands behind the CLI.

use std::path::Path;

use stormbench_core::channel::SceneConfig;
use stormbench_core::metrics::LinkConfig;
use stormbench_engine::datalog::{self, DatalogConfig, ExperimentManifest};
use stormbench_engine::experiment::{recompute_metrics, record_experiment, ExperimentSpec, WindowMetrics};
use stormbench_engine::orchestrator::SchedulePlan;
use stormbench_engine::registry::{validate_descriptor, DescriptorError, Registry, WaveformDescriptor};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// A scene file, or the name of a built-in preset.
pub fn load_scene(arg: &str) -> anyhow::Result<SceneConfig> {
    if let Some(scene) = SceneConfig::preset(arg) {
        return Ok(scene);
    }
    let scene: SceneConfig = read_json(Path::new(arg))?;
    scene.validate()?;
    Ok(scene)
}

pub struct RunArgs<'a> {
    pub scene: &'a str,
    pub schedule: &'a Path,
    pub link: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: u64,
    pub capture: bool,
}

/// Runs a scheduled link trial and records it under `out`.
pub fn run(args: &RunArgs) -> anyhow::Result<ExperimentManifest> {
    let schedule: SchedulePlan = read_json(args.schedule)?;
    let link: LinkConfig = match args.link {
        Some(p) => read_json(p)?,
        None => LinkConfig::default(),
    };
    let spec = ExperimentSpec {
        scene: load_scene(args.scene)?,
        link,
        schedule,
        seed: args.seed,
        reference_frequency: 2.45e9,
        capture: args.capture,
    };
    let registry = Registry::with_builtins();
    Ok(record_experiment(&spec, &registry, &DatalogConfig::new(args.out))?)
}

/// Checks a descriptor file; `Err` carries either a parse message or the
/// full report.
pub fn validate(path: &Path) -> anyhow::Result<Result<WaveformDescriptor, DescriptorError>> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(validate_descriptor(&text))
}

/// ASER and KLD per window, recomputed from a run's captures.
pub fn metrics(root: &Path, run_id: &str) -> anyhow::Result<Vec<WindowMetrics>> {
    let manifest = datalog::load_run(root, run_id)?;
    let link = manifest.config.link.clone().unwrap_or_default();
    let windows = recompute_metrics(root, run_id, &link)?;
    anyhow::ensure!(!windows.is_empty(), "run '{run_id}' has no window captures; record it with --capture");
    Ok(windows)
}
