//! AM, FM and linear-sweep generators.

use std::f64::consts::TAU;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{check_rate, into_buffer, SampleSource};
use crate::error::{DspError, Result};
use crate::signal::{db_to_amplitude, IqBuffer, Nco};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmConfig {
    pub tone_freq: f64,
    pub mod_index: f64,
    pub carrier_offset: f64,
    pub gain_db: f64,
    pub sample_rate: f64,
}

impl Default for AmConfig {
    fn default() -> Self {
        Self { tone_freq: 1e3, mod_index: 0.5, carrier_offset: 0.0, gain_db: 0.0, sample_rate: 1e6 }
    }
}

/// `A·(1 + μ·cos(2π·f_m·n/fs))·e^(j2π·f_c·n/fs)`, with `A` chosen so the
/// mean power equals the gain setting.
pub struct AmGenerator {
    tone: Nco,
    carrier: Nco,
    mod_index: f64,
    amplitude: f64,
    sample_rate: f64,
}

impl AmGenerator {
    pub fn new(cfg: &AmConfig) -> Result<Self> {
        check_rate(cfg.sample_rate)?;
        if !(0.0..=1.0).contains(&cfg.mod_index) {
            return Err(DspError::Config(format!("modulation index must lie in [0, 1], got {}", cfg.mod_index)));
        }
        let tone = Nco::new(cfg.sample_rate, cfg.tone_freq, 0.0).map_err(as_config)?;
        let carrier = Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0).map_err(as_config)?;
        let amplitude = db_to_amplitude(cfg.gain_db) / (1.0 + cfg.mod_index * cfg.mod_index / 2.0).sqrt();
        Ok(Self { tone, carrier, mod_index: cfg.mod_index, amplitude, sample_rate: cfg.sample_rate })
    }
}

impl<T: Real> SampleSource<T> for AmGenerator {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        for s in out {
            let env = self.amplitude * (1.0 + self.mod_index * self.tone.next_phase().cos());
            let (sin, cos) = self.carrier.next_phase().sin_cos();
            *s = Complex::new(T::lit(env * cos), T::lit(env * sin));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FmConfig {
    pub tone_freq: f64,
    pub freq_deviation: f64,
    pub carrier_offset: f64,
    pub gain_db: f64,
    pub sample_rate: f64,
}

impl Default for FmConfig {
    fn default() -> Self {
        Self { tone_freq: 1e3, freq_deviation: 5e3, carrier_offset: 0.0, gain_db: 0.0, sample_rate: 1e6 }
    }
}

/// Constant-envelope tone FM: phase = 2π·f_c·t + (Δf/f_m)·sin(2π·f_m·t).
pub struct FmGenerator {
    tone: Nco,
    carrier: Nco,
    beta: f64,
    amplitude: f64,
    sample_rate: f64,
}

impl FmGenerator {
    pub fn new(cfg: &FmConfig) -> Result<Self> {
        check_rate(cfg.sample_rate)?;
        if !(cfg.freq_deviation >= 0.0 && cfg.freq_deviation + cfg.carrier_offset.abs() < cfg.sample_rate / 2.0) {
            return Err(DspError::Config(format!(
                "deviation {} Hz plus offset {} Hz exceeds Nyquist at {} Hz",
                cfg.freq_deviation, cfg.carrier_offset, cfg.sample_rate
            )));
        }
        let beta = if cfg.freq_deviation == 0.0 {
            0.0
        } else if cfg.tone_freq > 0.0 {
            cfg.freq_deviation / cfg.tone_freq
        } else {
            return Err(DspError::Config("tone frequency must be positive when deviating".into()));
        };
        Ok(Self {
            tone: Nco::new(cfg.sample_rate, cfg.tone_freq, 0.0).map_err(as_config)?,
            carrier: Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0).map_err(as_config)?,
            beta,
            amplitude: db_to_amplitude(cfg.gain_db),
            sample_rate: cfg.sample_rate,
        })
    }
}

impl<T: Real> SampleSource<T> for FmGenerator {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        for s in out {
            let phase = self.carrier.next_phase() + self.beta * self.tone.next_phase().sin();
            let (sin, cos) = phase.sin_cos();
            *s = Complex::new(T::lit(self.amplitude * cos), T::lit(self.amplitude * sin));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub f_start: f64,
    pub f_end: f64,
    pub period: f64,
    pub gain_db: f64,
    pub sample_rate: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::at_rate(1e6)
    }
}

impl SweepConfig {
    /// ±40% of the sample rate every 100 ms.
    pub fn at_rate(sample_rate: f64) -> Self {
        Self { f_start: -0.4 * sample_rate, f_end: 0.4 * sample_rate, period: 0.1, gain_db: 0.0, sample_rate }
    }
}

/// Sawtooth linear chirp. The phase is accumulated sample by sample, so the
/// phase difference between consecutive samples is exactly the programmed
/// instantaneous frequency.
pub struct SweepGenerator {
    f_start: f64,
    slope_per_sample: f64,
    period_samples: u64,
    n_in_period: u64,
    phase: f64,
    amplitude: f64,
    sample_rate: f64,
}

impl SweepGenerator {
    pub fn new(cfg: &SweepConfig) -> Result<Self> {
        check_rate(cfg.sample_rate)?;
        let nyq = cfg.sample_rate / 2.0;
        if !(cfg.f_start.abs() < nyq && cfg.f_end.abs() < nyq) {
            return Err(DspError::Config(format!(
                "sweep bounds {}..{} Hz exceed Nyquist at {} Hz",
                cfg.f_start, cfg.f_end, cfg.sample_rate
            )));
        }
        let period_samples = (cfg.period * cfg.sample_rate).round();
        if !(cfg.period > 0.0 && period_samples >= 1.0) {
            return Err(DspError::Config(format!("sweep period must be positive, got {}", cfg.period)));
        }
        Ok(Self {
            f_start: cfg.f_start,
            slope_per_sample: (cfg.f_end - cfg.f_start) / period_samples,
            period_samples: period_samples as u64,
            n_in_period: 0,
            phase: 0.0,
            amplitude: db_to_amplitude(cfg.gain_db),
            sample_rate: cfg.sample_rate,
        })
    }

    fn instantaneous_freq(&self) -> f64 {
        self.f_start + self.slope_per_sample * self.n_in_period as f64
    }
}

impl<T: Real> SampleSource<T> for SweepGenerator {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        for s in out {
            let (sin, cos) = self.phase.sin_cos();
            *s = Complex::new(T::lit(self.amplitude * cos), T::lit(self.amplitude * sin));
            self.phase = (self.phase + TAU * self.instantaneous_freq() / self.sample_rate).rem_euclid(TAU);
            self.n_in_period += 1;
            if self.n_in_period == self.period_samples {
                self.n_in_period = 0;
            }
        }
    }
}

fn as_config(e: DspError) -> DspError {
    match e {
        DspError::Range(m) => DspError::Config(m),
        other => other,
    }
}

pub fn gen_am<T: Real>(cfg: &AmConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer::<T>(&mut AmGenerator::new(cfg)?, n_samples)
}

pub fn gen_fm<T: Real>(cfg: &FmConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer::<T>(&mut FmGenerator::new(cfg)?, n_samples)
}

pub fn gen_sweep<T: Real>(cfg: &SweepConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer::<T>(&mut SweepGenerator::new(cfg)?, n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{compute_psd, WindowKind};

    fn pure_tone(n: usize, fs: f64, f: f64) -> Vec<Complex<f64>> {
        (0..n).map(|k| Complex::from_polar(1.0, TAU * f * k as f64 / fs)).collect()
    }

    #[test]
    fn am_index_zero_is_tone() {
        let cfg = AmConfig { mod_index: 0.0, carrier_offset: 50e3, ..Default::default() };
        let b = gen_am::<f64>(&cfg, 4096).unwrap();
        for (x, y) in b.samples().iter().zip(pure_tone(4096, 1e6, 50e3)) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn am_full_modulation_sidebands() {
        // tone on an exact FFT bin so the line amplitudes can be read off directly
        let fs = 1_048_576.0;
        let n = 65_536;
        let fm = 16.0 * fs / n as f64;
        let cfg = AmConfig { tone_freq: fm, mod_index: 1.0, carrier_offset: 0.0, gain_db: 0.0, sample_rate: fs };
        let b = gen_am::<f64>(&cfg, n).unwrap();
        let frame = compute_psd(&b, n, 0.0, WindowKind::Rectangular).unwrap();
        let c = frame.psd_bins[frame.bin_of(0.0)];
        let up = frame.psd_bins[frame.bin_of(fm)];
        let lo = frame.psd_bins[frame.bin_of(-fm)];
        for side in [up, lo] {
            let rel = 10.0 * (side / c).log10();
            assert!((rel + 6.0206).abs() < 0.01, "{rel}");
        }
    }

    #[test]
    fn am_zero_samples_and_bad_index() {
        assert!(gen_am::<f64>(&AmConfig::default(), 0).unwrap().is_empty());
        assert!(matches!(AmGenerator::new(&AmConfig { mod_index: 1.2, ..Default::default() }), Err(DspError::Config(_))));
        assert!(matches!(AmGenerator::new(&AmConfig { tone_freq: 6e5, ..Default::default() }), Err(DspError::Config(_))));
    }

    #[test]
    fn fm_zero_deviation_is_carrier() {
        let cfg = FmConfig { freq_deviation: 0.0, carrier_offset: -20e3, ..Default::default() };
        let b = gen_fm::<f64>(&cfg, 2048).unwrap();
        for (x, y) in b.samples().iter().zip(pure_tone(2048, 1e6, -20e3)) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn fm_constant_envelope() {
        let cfg = FmConfig { gain_db: 6.0, ..Default::default() };
        let a = db_to_amplitude(6.0);
        for s in gen_fm::<f64>(&cfg, 10_000).unwrap().samples() {
            assert!((s.norm() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn fm_nyquist_violation() {
        let cfg = FmConfig { freq_deviation: 3e5, carrier_offset: 2.5e5, ..Default::default() };
        assert!(matches!(FmGenerator::new(&cfg), Err(DspError::Config(_))));
    }

    #[test]
    fn sweep_flat_is_tone() {
        let cfg = SweepConfig { f_start: 10e3, f_end: 10e3, ..Default::default() };
        let b = gen_sweep::<f64>(&cfg, 5000).unwrap();
        for (x, y) in b.samples().iter().zip(pure_tone(5000, 1e6, 10e3)) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn sweep_constant_envelope_and_linear_frequency() {
        let cfg = SweepConfig { f_start: -200e3, f_end: 300e3, period: 0.01, gain_db: 0.0, sample_rate: 1e6 };
        let b = gen_sweep::<f64>(&cfg, 25_000).unwrap();
        let x = b.samples();
        assert!(x.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
        let span = cfg.f_end - cfg.f_start;
        let slope = span / cfg.period;
        let p = (cfg.period * cfg.sample_rate) as usize;
        let mut worst = 0.0f64;
        for n in 0..x.len() - 1 {
            if (n + 1) % p == 0 {
                continue; // sawtooth reset
            }
            let est = (x[n + 1] * x[n].conj()).arg() * cfg.sample_rate / TAU;
            let t = (n % p) as f64 / cfg.sample_rate;
            worst = worst.max((est - (cfg.f_start + slope * t)).abs());
        }
        assert!(worst < 0.01 * span, "max deviation {worst} Hz");
    }

    #[test]
    fn sweep_rejects_bad_config() {
        assert!(SweepGenerator::new(&SweepConfig { f_end: 6e5, ..Default::default() }).is_err());
        assert!(SweepGenerator::new(&SweepConfig { period: 0.0, ..Default::default() }).is_err());
    }
}
