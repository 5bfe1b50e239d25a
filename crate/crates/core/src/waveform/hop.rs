use num_complex::Complex;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{into_buffer, BaselineConfig, BaselineGenerator, SampleSource};
use crate::error::{DspError, Result};
use crate::rng::{seeded, stream, Rng};
use crate::signal::{IqBuffer, Nco};
use crate::Real;

/// Channel set, dwell time and hop-order seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopPlan {
    pub channel_offsets: Vec<f64>,
    pub dwell: f64,
    pub seed: u64,
}

impl HopPlan {
    /// `n` channels spaced `spacing` apart, centred on zero.
    pub fn evenly_spaced(n: usize, spacing: f64, dwell: f64, seed: u64) -> Self {
        let mid = (n as f64 - 1.0) / 2.0;
        Self { channel_offsets: (0..n).map(|i| (i as f64 - mid) * spacing).collect(), dwell, seed }
    }

    fn order_rng(&self) -> Rng {
        seeded(self.seed, stream::HOPS)
    }

    /// Channel indices of the first `dwells` hops.
    pub fn order(&self, dwells: usize) -> Vec<usize> {
        let mut rng = self.order_rng();
        (0..dwells).map(|_| next_channel(&mut rng, self.channel_offsets.len())).collect()
    }
}

fn next_channel(rng: &mut Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopConfig {
    pub plan: HopPlan,
    pub inner: BaselineConfig,
}

impl Default for HopConfig {
    fn default() -> Self {
        Self::at_rate(1e6)
    }
}

impl HopConfig {
    /// 8 channels at a tenth of the sample rate apart, 10 ms dwell.
    pub fn at_rate(sample_rate: f64) -> Self {
        Self {
            plan: HopPlan::evenly_spaced(8, sample_rate / 10.0, 0.01, 0),
            inner: BaselineConfig::at_rate(sample_rate),
        }
    }
}

/// Baseline stream hopped across the plan's channels, phase-continuous at
/// every hop.
pub struct HopGenerator<T: Real> {
    inner: BaselineGenerator<T>,
    offsets: Vec<f64>,
    dwell_samples: u64,
    pos_in_dwell: u64,
    rng: Rng,
    nco: Nco,
    started: bool,
    sample_rate: f64,
}

impl<T: Real> HopGenerator<T> {
    pub fn new(cfg: &HopConfig) -> Result<Self> {
        let plan = &cfg.plan;
        if plan.channel_offsets.is_empty() {
            return Err(DspError::Config("hop plan has no channels".into()));
        }
        let fs = cfg.inner.sample_rate;
        if let Some(f) = plan.channel_offsets.iter().find(|f| !(f.abs() < fs / 2.0)) {
            return Err(DspError::Config(format!("hop channel {f} Hz is outside Nyquist")));
        }
        let inner_cfg = BaselineConfig { carrier_offset: 0.0, ..cfg.inner.clone() };
        let sps = inner_cfg.samples_per_symbol()?;
        let dwell_samples = (plan.dwell * fs).round();
        if !(plan.dwell > 0.0 && dwell_samples >= (10 * sps) as f64) {
            return Err(DspError::Config(format!(
                "dwell {} s is shorter than 10 symbol periods",
                plan.dwell
            )));
        }
        Ok(Self {
            inner: BaselineGenerator::new(&inner_cfg)?,
            offsets: plan.channel_offsets.clone(),
            dwell_samples: dwell_samples as u64,
            pos_in_dwell: 0,
            rng: plan.order_rng(),
            nco: Nco::new(fs, 0.0, 0.0)?,
            started: false,
            sample_rate: fs,
        })
    }

    pub fn dwell_samples(&self) -> u64 {
        self.dwell_samples
    }
}

impl<T: Real> SampleSource<T> for HopGenerator<T> {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        self.inner.fill(out);
        for s in out.iter_mut() {
            if !self.started || self.pos_in_dwell == self.dwell_samples {
                let ch = next_channel(&mut self.rng, self.offsets.len());
                self.nco.retune(self.offsets[ch]).expect("offsets validated at construction");
                self.pos_in_dwell = 0;
                self.started = true;
            }
            *s = *s * self.nco.next::<T>();
            self.pos_in_dwell += 1;
        }
    }
}

pub fn gen_hop<T: Real>(cfg: &HopConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer(&mut HopGenerator::<T>::new(cfg)?, n_samples)
}
