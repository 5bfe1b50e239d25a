//! Simulated UPS battery.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    pub capacity_wh: f64,
    /// Draw of the bench while a session runs, watts.
    pub load_watts: f64,
    /// Charge at startup, 0 to 1.
    pub initial_fraction: f64,
}

impl Default for PowerConfig {
    /// 120 Wh at 60 W: two hours from full.
    fn default() -> Self {
        Self { capacity_wh: 120.0, load_watts: 60.0, initial_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerStatus {
    pub battery_fraction: f64,
    /// Seconds left at the current load.
    pub estimated_runtime: f64,
    pub load: f64,
}

#[derive(Debug, Clone)]
pub struct Battery {
    capacity_joules: f64,
    load: f64,
    fraction: f64,
}

impl Battery {
    pub fn new(cfg: PowerConfig) -> anyhow::Result<Self> {
        anyhow::ensure!(cfg.capacity_wh > 0.0 && cfg.capacity_wh.is_finite(), "capacity must be positive");
        anyhow::ensure!(cfg.load_watts > 0.0 && cfg.load_watts.is_finite(), "load must be positive");
        anyhow::ensure!((0.0..=1.0).contains(&cfg.initial_fraction), "initial charge must lie in [0, 1]");
        Ok(Self { capacity_joules: cfg.capacity_wh * 3600.0, load: cfg.load_watts, fraction: cfg.initial_fraction })
    }

    pub fn status(&self) -> PowerStatus {
        PowerStatus {
            battery_fraction: self.fraction,
            estimated_runtime: self.fraction * self.capacity_joules / self.load,
            load: self.load,
        }
    }

    pub fn set_load(&mut self, watts: f64) -> anyhow::Result<()> {
        anyhow::ensure!(watts > 0.0 && watts.is_finite(), "load must be positive");
        self.load = watts;
        Ok(())
    }

    pub fn is_exhausted(&self) -> bool {
        self.fraction <= 0.0
    }

    /// Draws the current load for `seconds`. Returns true when this call
    /// empties the battery.
    pub fn drain(&mut self, seconds: f64) -> bool {
        if self.is_exhausted() || seconds <= 0.0 {
            return false;
        }
        self.fraction = (self.fraction - self.load * seconds / self.capacity_joules).max(0.0);
        self.is_exhausted()
    }
}
