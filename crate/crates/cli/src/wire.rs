//! JSON encodings of the live stream.
//!
//! Each message carries a per-subscription sequence number. Spectrum bins
//! travel as base64 of little-endian f32 values, linear power per Hz.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use stormbench_core::spectrum::SpectrumFrame;
use stormbench_engine::orchestrator::SessionEvent;

use crate::power::PowerStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMessage {
    pub seq: u64,
    pub window_id: u64,
    /// Stream sample index of the frame's first sample.
    pub timestamp: u64,
    pub bin_spacing: f64,
    pub center_offset: f64,
    pub n_bins: usize,
    pub bins: String,
}

impl SpectrumMessage {
    pub fn encode(seq: u64, frame: &SpectrumFrame) -> Self {
        let bytes: Vec<u8> = frame.psd_bins.iter().flat_map(|&p| (p as f32).to_le_bytes()).collect();
        Self {
            seq,
            window_id: frame.window_id,
            timestamp: frame.timestamp,
            bin_spacing: frame.bin_spacing,
            center_offset: frame.center_offset,
            n_bins: frame.psd_bins.len(),
            bins: STANDARD.encode(bytes),
        }
    }

    pub fn decode_bins(&self) -> anyhow::Result<Vec<f32>> {
        let bytes = STANDARD.decode(&self.bins)?;
        anyhow::ensure!(bytes.len() == 4 * self.n_bins, "expected {} bins, got {} bytes", self.n_bins, bytes.len());
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMessage {
    pub seq: u64,
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMessage {
    pub seq: u64,
    pub status: PowerStatus,
}

/// SSE event names.
pub const SPECTRUM: &str = "spectrum";
pub const EVENT: &str = "event";
pub const POWER: &str = "power";
