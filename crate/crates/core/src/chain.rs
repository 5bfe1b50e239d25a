//! Shared base chains for composed waveforms.
//!
//! A composed waveform supplies only its symbol or frame logic; the chain
//! owns modulation, scaling and the carrier offset. The narrowband chain
//! performs the same arithmetic in the same order as
//! [`BaselineGenerator`](crate::waveform::BaselineGenerator), so baseline
//! symbols through it produce an identical stream.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::{db_to_amplitude, Constellation, Nco, PulseShaper, RootRaisedCosine};
use crate::waveform::{check_rate, samples_per_symbol, SampleSource, SymbolSource};
use crate::Real;

/// Produces one unit-power symbol per call.
pub trait SymbolLogic<T: Real>: Send {
    fn next_symbol(&mut self) -> Complex<T>;
}

/// Produces whole baseband frames at unit average power.
pub trait FrameLogic<T: Real>: Send {
    fn next_frame(&mut self, out: &mut Vec<Complex<T>>);
}

/// Uniform random constellation symbols.
pub struct RandomSymbols<T: Real> {
    constellation: Constellation<T>,
    source: SymbolSource,
}

impl<T: Real> RandomSymbols<T> {
    pub fn new(constellation: Constellation<T>, source: SymbolSource) -> Self {
        Self { constellation, source }
    }
}

impl<T: Real> SymbolLogic<T> for RandomSymbols<T> {
    fn next_symbol(&mut self) -> Complex<T> {
        self.source.next_symbol(&self.constellation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandChainConfig {
    pub sample_rate: f64,
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub gain_db: f64,
    pub carrier_offset: f64,
}

pub struct NarrowbandChain<T: Real> {
    logic: Box<dyn SymbolLogic<T>>,
    shaper: PulseShaper<T>,
    amplitude: T,
    nco: Option<Nco>,
    sample_rate: f64,
}

impl<T: Real> NarrowbandChain<T> {
    pub fn new(cfg: &NarrowbandChainConfig, logic: Box<dyn SymbolLogic<T>>) -> Result<Self> {
        let sps = samples_per_symbol(cfg.sample_rate, cfg.symbol_rate)?;
        let filter = RootRaisedCosine::new(sps, cfg.rolloff)?;
        let nco = if cfg.carrier_offset != 0.0 { Some(Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0)?) } else { None };
        Ok(Self {
            logic,
            shaper: PulseShaper::new(&filter),
            amplitude: T::lit(db_to_amplitude(cfg.gain_db)),
            nco,
            sample_rate: cfg.sample_rate,
        })
    }
}

impl<T: Real> SampleSource<T> for NarrowbandChain<T> {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        let Self { logic, shaper, amplitude, nco, .. } = self;
        let mut feed = || logic.next_symbol();
        for s in out.iter_mut() {
            *s = shaper.next_with(&mut feed) * *amplitude;
        }
        if let Some(nco) = nco {
            nco.mix_in_place(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidebandChainConfig {
    pub sample_rate: f64,
    pub gain_db: f64,
    pub carrier_offset: f64,
}

pub struct WidebandChain<T: Real> {
    logic: Box<dyn FrameLogic<T>>,
    pending: Vec<Complex<T>>,
    pos: usize,
    amplitude: T,
    nco: Option<Nco>,
    sample_rate: f64,
}

impl<T: Real> WidebandChain<T> {
    pub fn new(cfg: &WidebandChainConfig, logic: Box<dyn FrameLogic<T>>) -> Result<Self> {
        check_rate(cfg.sample_rate)?;
        let nco = if cfg.carrier_offset != 0.0 { Some(Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0)?) } else { None };
        Ok(Self {
            logic,
            pending: Vec::new(),
            pos: 0,
            amplitude: T::lit(db_to_amplitude(cfg.gain_db)),
            nco,
            sample_rate: cfg.sample_rate,
        })
    }
}

impl<T: Real> SampleSource<T> for WidebandChain<T> {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        let mut written = 0;
        while written < out.len() {
            if self.pos == self.pending.len() {
                self.pending.clear();
                self.pos = 0;
                while self.pending.is_empty() {
                    self.logic.next_frame(&mut self.pending);
                }
            }
            let take = (self.pending.len() - self.pos).min(out.len() - written);
            for (d, s) in out[written..written + take].iter_mut().zip(&self.pending[self.pos..self.pos + take]) {
                *d = *s * self.amplitude;
            }
            self.pos += take;
            written += take;
        }
        if let Some(nco) = &mut self.nco {
            nco.mix_in_place(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Modulation;
    use crate::waveform::{BaselineConfig, BaselineGenerator};

    #[test]
    fn narrowband_chain_reproduces_baseline() {
        let cfg = BaselineConfig { gain_db: 7.0, carrier_offset: 12_345.0, seed: 3, ..Default::default() };
        let mut direct = BaselineGenerator::<f64>::new(&cfg).unwrap();
        let chain_cfg = NarrowbandChainConfig {
            sample_rate: cfg.sample_rate,
            symbol_rate: cfg.symbol_rate,
            rolloff: cfg.rolloff,
            gain_db: cfg.gain_db,
            carrier_offset: cfg.carrier_offset,
        };
        let logic = RandomSymbols::new(Modulation::Qpsk.constellation(), SymbolSource::seeded(3));
        let mut composed = NarrowbandChain::new(&chain_cfg, Box::new(logic)).unwrap();
        assert_eq!(direct.generate(50_000), composed.generate(50_000));
    }

    struct Ramp(u32);

    impl FrameLogic<f64> for Ramp {
        fn next_frame(&mut self, out: &mut Vec<Complex<f64>>) {
            self.0 += 1;
            out.extend((0..self.0).map(|i| Complex::new(f64::from(i), 0.0)));
        }
    }

    #[test]
    fn wideband_chain_concatenates_frames() {
        let cfg = WidebandChainConfig { sample_rate: 1e6, gain_db: 20.0, carrier_offset: 0.0 };
        let mut chain = WidebandChain::new(&cfg, Box::new(Ramp(0))).unwrap();
        let out = chain.generate(6);
        let want: Vec<_> = [0.0, 0.0, 1.0, 0.0, 1.0, 2.0].iter().map(|&v| Complex::new(v * 10.0, 0.0)).collect();
        let err = out.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
