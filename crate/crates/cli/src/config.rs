use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stormbench_engine::monitor::MonitorConfig;
use stormbench_engine::orchestrator::SimulationConfig;

use crate::power::PowerConfig;

/// Overrides the configured run directory.
pub const RUN_DIR_ENV: &str = "STORMBENCH_RUN_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub run_dir: PathBuf,
    pub simulation: SimulationConfig,
    pub monitor: MonitorConfig,
    pub power: PowerConfig,
    /// Pace the stream at its sample rate.
    pub real_time: bool,
    pub broadcast_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            run_dir: "runs".into(),
            simulation: SimulationConfig::default(),
            monitor: MonitorConfig::default(),
            power: PowerConfig::default(),
            real_time: true,
            broadcast_capacity: 64,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Applies `STORMBENCH_RUN_DIR` if set.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(RUN_DIR_ENV) {
            self.run_dir = dir.into();
        }
        self
    }
}
