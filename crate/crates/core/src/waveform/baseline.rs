use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{into_buffer, samples_per_symbol, SampleSource, SymbolSource};
use crate::error::Result;
use crate::signal::{db_to_amplitude, Constellation, IqBuffer, Modulation, Nco, PulseShaper, RootRaisedCosine};
use crate::Real;

/// Single-carrier continuous transmission of pulse-shaped random symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub modulation: Modulation,
    pub sample_rate: f64,
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub gain_db: f64,
    pub carrier_offset: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self::at_rate(1e6)
    }
}

impl BaselineConfig {
    /// Defaults at `sample_rate`: QPSK at 1/16 of the sample rate, so the
    /// occupied band stays under a tenth of the channel.
    pub fn at_rate(sample_rate: f64) -> Self {
        Self {
            modulation: Modulation::Qpsk,
            sample_rate,
            symbol_rate: sample_rate / 16.0,
            rolloff: 0.35,
            gain_db: 0.0,
            carrier_offset: 0.0,
            seed: 0,
        }
    }

    pub fn samples_per_symbol(&self) -> Result<usize> {
        samples_per_symbol(self.sample_rate, self.symbol_rate)
    }
}

pub struct BaselineGenerator<T: Real> {
    constellation: Constellation<T>,
    shaper: PulseShaper<T>,
    source: SymbolSource,
    amplitude: T,
    nco: Option<Nco>,
    sample_rate: f64,
}

impl<T: Real> BaselineGenerator<T> {
    pub fn new(cfg: &BaselineConfig) -> Result<Self> {
        Self::with_source(cfg, SymbolSource::seeded(cfg.seed))
    }

    pub fn with_source(cfg: &BaselineConfig, source: SymbolSource) -> Result<Self> {
        let sps = cfg.samples_per_symbol()?;
        let filter = RootRaisedCosine::new(sps, cfg.rolloff)?;
        let nco = if cfg.carrier_offset != 0.0 { Some(Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0)?) } else { None };
        Ok(Self {
            constellation: cfg.modulation.constellation(),
            shaper: PulseShaper::new(&filter),
            source,
            amplitude: T::lit(db_to_amplitude(cfg.gain_db)),
            nco,
            sample_rate: cfg.sample_rate,
        })
    }
}

impl<T: Real> SampleSource<T> for BaselineGenerator<T> {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        let Self { constellation, shaper, source, amplitude, nco, .. } = self;
        let mut feed = || source.next_symbol(constellation);
        for s in out.iter_mut() {
            *s = shaper.next_with(&mut feed) * *amplitude;
        }
        if let Some(nco) = nco {
            nco.mix_in_place(out);
        }
    }
}

pub fn gen_baseline<T: Real>(cfg: &BaselineConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer(&mut BaselineGenerator::<T>::new(cfg)?, n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{matched_filter_symbols, mean_power};
    use crate::DspError;

    #[test]
    fn all_zero_bits_give_plus_one_after_matched_filter() {
        let cfg = BaselineConfig { modulation: Modulation::Bpsk, symbol_rate: 125e3, ..Default::default() };
        let mut g = BaselineGenerator::<f64>::with_source(&cfg, SymbolSource::pattern(vec![false]).unwrap()).unwrap();
        let tx = g.generate(8 * 400);
        let rx = matched_filter_symbols(&tx, 8, 0.35, 380).unwrap();
        for r in &rx {
            assert!((r - Complex::new(1.0, 0.0)).norm() < 1e-6, "{r}");
        }
    }

    #[test]
    fn unit_power_at_zero_db() {
        let b = gen_baseline::<f64>(&BaselineConfig::default(), 200_000).unwrap();
        assert!((b.mean_power() - 1.0).abs() < 0.02, "{}", b.mean_power());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = BaselineConfig { seed: 99, ..Default::default() };
        let a = gen_baseline::<f64>(&cfg, 5000).unwrap();
        let b = gen_baseline::<f64>(&cfg, 5000).unwrap();
        assert_eq!(a, b);
        let c = gen_baseline::<f64>(&BaselineConfig { seed: 100, ..cfg }, 5000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rate_mismatch_is_config_error() {
        let cfg = BaselineConfig { symbol_rate: 300e3, ..Default::default() };
        assert!(matches!(BaselineGenerator::<f64>::new(&cfg), Err(DspError::Config(_))));
        let cfg = BaselineConfig { symbol_rate: 1e6, ..Default::default() };
        assert!(matches!(BaselineGenerator::<f64>::new(&cfg), Err(DspError::Config(_))));
    }

    #[test]
    fn gain_scales_power() {
        let cfg = BaselineConfig { gain_db: 10.0, ..Default::default() };
        let b = gen_baseline::<f64>(&cfg, 200_000).unwrap();
        assert!((mean_power(b.samples()) / 10.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn f32_tracks_f64() {
        let cfg = BaselineConfig { carrier_offset: 100e3, ..Default::default() };
        let a = gen_baseline::<f64>(&cfg, 4096).unwrap();
        let b = gen_baseline::<f32>(&cfg, 4096).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x.re - y.re as f64).abs() < 1e-5 && (x.im - y.im as f64).abs() < 1e-5);
        }
    }
}
