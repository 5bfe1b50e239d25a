use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binding::BuildContext;
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interface {
    Ethernet,
    Usb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub max_sample_rate: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Unassigned,
    Transmitter,
    Monitor,
}

/// A device entry in the simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub model: String,
    pub interface: Interface,
    #[serde(flatten)]
    pub capabilities: Capabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualDevice {
    pub device_id: String,
    pub model: String,
    pub interface: Interface,
    pub capabilities: Capabilities,
    pub role: Role,
}

impl From<&DeviceProfile> for VirtualDevice {
    fn from(p: &DeviceProfile) -> Self {
        Self {
            device_id: p.device_id.clone(),
            model: p.model.clone(),
            interface: p.interface,
            capabilities: p.capabilities,
            role: Role::Unassigned,
        }
    }
}

/// The simulated bench: attached devices plus stream settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub devices: Vec<DeviceProfile>,
    pub sample_rate: f64,
    /// RF frequency at the centre of the simulated band.
    pub reference_frequency: f64,
    /// Samples per emitted buffer; commands apply between buffers.
    pub buffer_size: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            devices: vec![
                DeviceProfile {
                    device_id: "n210-0".into(),
                    model: "USRP N210".into(),
                    interface: Interface::Ethernet,
                    capabilities: Capabilities { min_frequency: 70e6, max_frequency: 6e9, max_sample_rate: 25e6 },
                },
                DeviceProfile {
                    device_id: "b210-0".into(),
                    model: "USRP B210".into(),
                    interface: Interface::Usb,
                    capabilities: Capabilities { min_frequency: 70e6, max_frequency: 6e9, max_sample_rate: 61.44e6 },
                },
            ],
            sample_rate: 1e6,
            reference_frequency: 2.45e9,
            buffer_size: 4096,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(EngineError::Parse(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if self.buffer_size == 0 {
            return Err(EngineError::Parse("buffer_size must be positive".into()));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if self.devices[..i].iter().any(|o| o.device_id == d.device_id) {
                return Err(EngineError::Parse(format!("device id '{}' appears twice", d.device_id)));
            }
        }
        Ok(())
    }

    pub fn build_context(&self, seed: u64) -> BuildContext {
        BuildContext { sample_rate: self.sample_rate, reference_frequency: self.reference_frequency, seed }
    }
}
