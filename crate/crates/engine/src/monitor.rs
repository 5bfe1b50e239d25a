//! Spectrum monitoring of the transmit stream.

use serde::{Deserialize, Serialize};
use stormbench_core::spectrum::{compute_psd, SpectrumFrame, WindowKind};
use stormbench_core::waveform::Category;
use stormbench_core::{Complex, IqBuffer64};

use crate::Result;

/// Occupied-band fraction below which a stream counts as narrowband.
pub const NARROWBAND_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    pub fft_size: usize,
    pub overlap: f64,
    pub window: WindowKind,
    /// Samples averaged into one frame.
    pub frame_len: usize,
    /// Frames per second of stream time.
    pub rate: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { fft_size: 1024, overlap: 0.5, window: WindowKind::Hann, frame_len: 4096, rate: 10.0 }
    }
}

/// Sample index of the next frame due at `rate` frames per stream second,
/// or `None` for rate 0.
fn interval(rate: f64, sample_rate: f64) -> Option<u64> {
    (rate > 0.0).then(|| ((sample_rate / rate).round() as u64).max(1))
}

/// Cuts a buffer stream into Welch PSD frames at the configured rate. Each
/// frame covers `frame_len` consecutive samples and is stamped with the
/// index of its first sample.
pub struct SpectrumStreamer {
    cfg: MonitorConfig,
    sample_rate: f64,
    next_due: u64,
    pending: Vec<Complex<f64>>,
    pending_start: u64,
    next_id: u64,
}

impl SpectrumStreamer {
    pub fn new(cfg: MonitorConfig, sample_rate: f64) -> Self {
        Self { cfg, sample_rate, next_due: 0, pending: Vec::new(), pending_start: 0, next_id: 0 }
    }

    /// Starts the first frame at `index` instead of 0.
    pub fn starting_at(mut self, index: u64) -> Self {
        self.next_due = index;
        self
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    /// Feeds one buffer; returns the frames it completes.
    pub fn push(&mut self, buffer: &IqBuffer64) -> Result<Vec<SpectrumFrame>> {
        let Some(step) = interval(self.cfg.rate, self.sample_rate) else { return Ok(Vec::new()) };
        let mut frames = Vec::new();
        let x = buffer.samples();
        let mut i = 0usize;
        while i < x.len() {
            let index = buffer.start() + i as u64;
            if self.pending.is_empty() {
                if index < self.next_due {
                    i += ((self.next_due - index) as usize).min(x.len() - i);
                    continue;
                }
                self.pending_start = index;
            }
            let take = (self.cfg.frame_len - self.pending.len()).min(x.len() - i);
            self.pending.extend_from_slice(&x[i..i + take]);
            i += take;
            if self.pending.len() == self.cfg.frame_len {
                let buf = IqBuffer64::new(std::mem::take(&mut self.pending), self.sample_rate, self.pending_start)?;
                let mut frame = compute_psd(&buf, self.cfg.fft_size, self.cfg.overlap, self.cfg.window)?;
                frame.window_id = self.next_id;
                self.next_id += 1;
                self.next_due = (self.pending_start + step).max(self.pending_start + self.cfg.frame_len as u64);
                frames.push(frame);
            }
        }
        Ok(frames)
    }
}

/// Thins a frame sequence to at most `rate` frames per stream second.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    step: Option<u64>,
    next_due: u64,
}

impl RateLimiter {
    pub fn new(rate: f64, sample_rate: f64) -> Self {
        Self { step: interval(rate, sample_rate), next_due: 0 }
    }

    pub fn admit(&mut self, frame: &SpectrumFrame) -> bool {
        match self.step {
            Some(step) if frame.timestamp >= self.next_due => {
                self.next_due = frame.timestamp + step;
                true
            }
            _ => false,
        }
    }
}

/// Median 99%-power bandwidth over frames, in Hz.
pub fn median_occupied_bandwidth(frames: &[SpectrumFrame]) -> Option<f64> {
    let mut bw: Vec<f64> = frames.iter().filter(|f| f.total_power() > 0.0).map(|f| f.occupied_bandwidth(0.99)).collect();
    if bw.is_empty() {
        return None;
    }
    bw.sort_by(f64::total_cmp);
    let n = bw.len();
    Some(if n % 2 == 1 { bw[n / 2] } else { 0.5 * (bw[n / 2 - 1] + bw[n / 2]) })
}

/// Narrowband when the median occupied band is under a tenth of the
/// sample rate.
pub fn classify(frames: &[SpectrumFrame], sample_rate: f64) -> Option<Category> {
    let bw = median_occupied_bandwidth(frames)?;
    Some(if bw < NARROWBAND_FRACTION * sample_rate { Category::Narrowband } else { Category::Wideband })
}
