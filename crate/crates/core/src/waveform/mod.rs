//! Built-in interference waveforms.
//!
//! Every generator is a resumable [`SampleSource`]: generating `n` samples and
//! then `m` more yields exactly the samples of one `n + m` call. All of them
//! emit unit average power at 0 dB gain.

mod analog;
mod baseline;
mod dft;
mod hop;
mod ofdm;
mod otfs;
mod spread;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::rng::Rng;
use crate::signal::{Constellation, IqBuffer};
use crate::Real;

pub use analog::{gen_am, gen_fm, gen_sweep, AmConfig, AmGenerator, FmConfig, FmGenerator, SweepConfig, SweepGenerator};
pub use baseline::{gen_baseline, BaselineConfig, BaselineGenerator};
pub use hop::{gen_hop, HopConfig, HopGenerator, HopPlan};
pub use ofdm::{gen_ofdm, ofdm_demodulate, ofdm_modulate, OfdmConfig, OfdmFrames, OfdmGenerator, OfdmModem, OfdmWaveformConfig};
pub use otfs::{gen_otfs, isfft, otfs_demodulate, otfs_modulate, sfft, OtfsConfig, OtfsFrames, OtfsGenerator, OtfsModem, OtfsWaveformConfig};
pub use spread::{
    despread, despread_with_code, pn_code, spread, spread_with_code, gen_dsss, DsssConfig, DsssGenerator, SpreadConfig,
};

/// A resumable producer of baseband samples.
pub trait SampleSource<T: Real>: Send {
    fn sample_rate(&self) -> f64;

    fn fill(&mut self, out: &mut [Complex<T>]);

    fn generate(&mut self, n: usize) -> Vec<Complex<T>> {
        let mut v = vec![Complex::new(T::zero(), T::zero()); n];
        self.fill(&mut v);
        v
    }
}

impl<T: Real, S: SampleSource<T> + ?Sized> SampleSource<T> for Box<S> {
    fn sample_rate(&self) -> f64 {
        (**self).sample_rate()
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        (**self).fill(out)
    }
}

/// All-zero source; the carrier is silent but the clock still runs.
#[derive(Debug, Clone)]
pub struct Silence {
    sample_rate: f64,
}

impl Silence {
    pub fn new(sample_rate: f64) -> Self {
        Self { sample_rate }
    }
}

impl<T: Real> SampleSource<T> for Silence {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        out.fill(Complex::new(T::zero(), T::zero()));
    }
}

/// Where data symbols come from.
#[derive(Debug, Clone)]
pub enum SymbolSource {
    /// Uniform labels from a seeded stream.
    Seeded(Rng),
    /// A fixed bit pattern, repeated.
    Pattern { bits: Vec<bool>, pos: usize },
}

impl SymbolSource {
    pub fn seeded(seed: u64) -> Self {
        SymbolSource::Seeded(crate::rng::seeded(seed, crate::rng::stream::SYMBOLS))
    }

    pub fn pattern(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(DspError::Config("bit pattern must not be empty".into()));
        }
        Ok(SymbolSource::Pattern { bits, pos: 0 })
    }

    pub fn next_label(&mut self, bits_per_symbol: usize) -> usize {
        match self {
            SymbolSource::Seeded(rng) => rng.next_u32() as usize & ((1 << bits_per_symbol) - 1),
            SymbolSource::Pattern { bits, pos } => {
                let mut label = 0;
                for _ in 0..bits_per_symbol {
                    label = (label << 1) | bits[*pos] as usize;
                    *pos = (*pos + 1) % bits.len();
                }
                label
            }
        }
    }

    pub fn next_symbol<T: Real>(&mut self, constellation: &Constellation<T>) -> Complex<T> {
        constellation.point(self.next_label(constellation.bits_per_symbol()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Narrowband,
    Wideband,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Narrowband => "narrowband",
            Category::Wideband => "wideband",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Baseline,
    Am,
    Fm,
    Hop,
    Sweep,
    Dsss,
    Ofdm,
    Otfs,
}

impl WaveformKind {
    pub const ALL: [WaveformKind; 8] = [
        WaveformKind::Baseline,
        WaveformKind::Am,
        WaveformKind::Fm,
        WaveformKind::Hop,
        WaveformKind::Sweep,
        WaveformKind::Dsss,
        WaveformKind::Ofdm,
        WaveformKind::Otfs,
    ];

    pub fn category(self) -> Category {
        match self {
            WaveformKind::Baseline | WaveformKind::Am | WaveformKind::Fm | WaveformKind::Hop | WaveformKind::Sweep => {
                Category::Narrowband
            }
            WaveformKind::Dsss | WaveformKind::Ofdm | WaveformKind::Otfs => Category::Wideband,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveformKind::Baseline => "baseline",
            WaveformKind::Am => "am",
            WaveformKind::Fm => "fm",
            WaveformKind::Hop => "hop",
            WaveformKind::Sweep => "sweep",
            WaveformKind::Dsss => "dsss",
            WaveformKind::Ofdm => "ofdm",
            WaveformKind::Otfs => "otfs",
        }
    }
}

impl fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveformKind {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self> {
        WaveformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DspError::Config(format!("unknown waveform implementation '{s}'")))
    }
}

/// Configuration of any built-in waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveformConfig {
    Baseline(BaselineConfig),
    Am(AmConfig),
    Fm(FmConfig),
    Hop(HopConfig),
    Sweep(SweepConfig),
    Dsss(DsssConfig),
    Ofdm(OfdmWaveformConfig),
    Otfs(OtfsWaveformConfig),
}

impl WaveformConfig {
    pub fn kind(&self) -> WaveformKind {
        match self {
            WaveformConfig::Baseline(_) => WaveformKind::Baseline,
            WaveformConfig::Am(_) => WaveformKind::Am,
            WaveformConfig::Fm(_) => WaveformKind::Fm,
            WaveformConfig::Hop(_) => WaveformKind::Hop,
            WaveformConfig::Sweep(_) => WaveformKind::Sweep,
            WaveformConfig::Dsss(_) => WaveformKind::Dsss,
            WaveformConfig::Ofdm(_) => WaveformKind::Ofdm,
            WaveformConfig::Otfs(_) => WaveformKind::Otfs,
        }
    }

    /// Defaults for `kind` at the given sample rate.
    pub fn default_for(kind: WaveformKind, sample_rate: f64) -> Self {
        match kind {
            WaveformKind::Baseline => WaveformConfig::Baseline(BaselineConfig::at_rate(sample_rate)),
            WaveformKind::Am => WaveformConfig::Am(AmConfig { sample_rate, ..AmConfig::default() }),
            WaveformKind::Fm => WaveformConfig::Fm(FmConfig { sample_rate, ..FmConfig::default() }),
            WaveformKind::Hop => WaveformConfig::Hop(HopConfig::at_rate(sample_rate)),
            WaveformKind::Sweep => WaveformConfig::Sweep(SweepConfig::at_rate(sample_rate)),
            WaveformKind::Dsss => WaveformConfig::Dsss(DsssConfig::at_rate(sample_rate)),
            WaveformKind::Ofdm => WaveformConfig::Ofdm(OfdmWaveformConfig { sample_rate, ..Default::default() }),
            WaveformKind::Otfs => WaveformConfig::Otfs(OtfsWaveformConfig { sample_rate, ..Default::default() }),
        }
    }

    pub fn sample_rate(&self) -> f64 {
        match self {
            WaveformConfig::Baseline(c) => c.sample_rate,
            WaveformConfig::Am(c) => c.sample_rate,
            WaveformConfig::Fm(c) => c.sample_rate,
            WaveformConfig::Hop(c) => c.inner.sample_rate,
            WaveformConfig::Sweep(c) => c.sample_rate,
            WaveformConfig::Dsss(c) => c.sample_rate,
            WaveformConfig::Ofdm(c) => c.sample_rate,
            WaveformConfig::Otfs(c) => c.sample_rate,
        }
    }

    pub fn build<T: Real>(&self) -> Result<Box<dyn SampleSource<T>>> {
        Ok(match self {
            WaveformConfig::Baseline(c) => Box::new(BaselineGenerator::new(c)?),
            WaveformConfig::Am(c) => Box::new(AmGenerator::new(c)?),
            WaveformConfig::Fm(c) => Box::new(FmGenerator::new(c)?),
            WaveformConfig::Hop(c) => Box::new(HopGenerator::new(c)?),
            WaveformConfig::Sweep(c) => Box::new(SweepGenerator::new(c)?),
            WaveformConfig::Dsss(c) => Box::new(DsssGenerator::new(c)?),
            WaveformConfig::Ofdm(c) => Box::new(OfdmGenerator::new(c)?),
            WaveformConfig::Otfs(c) => Box::new(OtfsGenerator::new(c)?),
        })
    }
}

pub fn check_rate(sample_rate: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(DspError::Config(format!("sample rate must be positive, got {sample_rate}")));
    }
    Ok(())
}

/// Integer samples per symbol for a symbol rate, or a configuration error.
pub fn samples_per_symbol(sample_rate: f64, symbol_rate: f64) -> Result<usize> {
    check_rate(sample_rate)?;
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(DspError::Config(format!("symbol rate must be positive, got {symbol_rate}")));
    }
    let ratio = sample_rate / symbol_rate;
    let sps = ratio.round();
    if (ratio - sps).abs() > 1e-9 * ratio || sps < 2.0 {
        return Err(DspError::Config(format!(
            "symbol rate {symbol_rate} Hz does not divide sample rate {sample_rate} Hz into >= 2 samples per symbol"
        )));
    }
    Ok(sps as usize)
}

pub(crate) fn into_buffer<T: Real>(source: &mut dyn SampleSource<T>, n: usize) -> Result<IqBuffer<T>> {
    let rate = source.sample_rate();
    IqBuffer::new(source.generate(n), rate, 0)
}
