//! OFDM with a cyclic prefix. Grid rows are OFDM symbols; column `k` is DFT
//! bin `k`, so column 0 is DC and columns above N/2 are negative frequencies.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::dft::UnitaryDft;
use super::{into_buffer, SampleSource, SymbolSource};
use crate::chain::{FrameLogic, WidebandChain, WidebandChainConfig};
use crate::error::{DspError, Result};
use crate::signal::{Constellation, IqBuffer, Modulation};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub active_mask: Vec<bool>,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self::new(64, 16).expect("valid default")
    }
}

impl OfdmConfig {
    /// Every subcarrier active except DC.
    pub fn new(n_subcarriers: usize, cp_length: usize) -> Result<Self> {
        let mut active_mask = vec![true; n_subcarriers];
        if let Some(dc) = active_mask.first_mut() {
            *dc = false;
        }
        Self::with_mask(n_subcarriers, cp_length, active_mask)
    }

    pub fn with_mask(n_subcarriers: usize, cp_length: usize, active_mask: Vec<bool>) -> Result<Self> {
        let cfg = Self { n_subcarriers, cp_length, active_mask };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_subcarriers.is_power_of_two() {
            return Err(DspError::Config(format!("n_subcarriers {} is not a power of two", self.n_subcarriers)));
        }
        if self.cp_length >= self.n_subcarriers {
            return Err(DspError::Config(format!(
                "cp_length {} must be below n_subcarriers {}",
                self.cp_length, self.n_subcarriers
            )));
        }
        if self.active_mask.len() != self.n_subcarriers {
            return Err(DspError::Shape(format!(
                "active_mask has {} entries for {} subcarriers",
                self.active_mask.len(),
                self.n_subcarriers
            )));
        }
        Ok(())
    }

    pub fn n_active(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }

    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_length
    }
}

/// Modulator and demodulator with cached DFT plans.
#[derive(Clone)]
pub struct OfdmModem<T: Real> {
    cfg: OfdmConfig,
    dft: UnitaryDft<T>,
}

impl<T: Real> OfdmModem<T> {
    pub fn new(cfg: &OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg: cfg.clone(), dft: UnitaryDft::new(cfg.n_subcarriers) })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    /// Appends one OFDM symbol, cyclic prefix first, to `out`.
    pub fn modulate_symbol(&self, row: ArrayView1<Complex<T>>, out: &mut Vec<Complex<T>>) -> Result<()> {
        let n = self.cfg.n_subcarriers;
        if row.len() != n {
            return Err(DspError::Shape(format!("grid row has {} entries, expected {n}", row.len())));
        }
        for (k, (&x, &active)) in row.iter().zip(&self.cfg.active_mask).enumerate() {
            if !active && x != Complex::new(T::zero(), T::zero()) {
                return Err(DspError::Shape(format!("inactive subcarrier {k} carries a nonzero value")));
            }
        }
        let mut body: Vec<Complex<T>> = row.to_vec();
        self.dft.inverse(&mut body);
        out.extend_from_slice(&body[n - self.cfg.cp_length..]);
        out.extend_from_slice(&body);
        Ok(())
    }

    pub fn modulate(&self, grid: &Array2<Complex<T>>) -> Result<Vec<Complex<T>>> {
        let mut out = Vec::with_capacity(grid.nrows() * self.cfg.symbol_len());
        for row in grid.rows() {
            self.modulate_symbol(row, &mut out)?;
        }
        Ok(out)
    }

    pub fn demodulate(&self, samples: &[Complex<T>]) -> Result<Array2<Complex<T>>> {
        let len = self.cfg.symbol_len();
        if samples.len() % len != 0 {
            return Err(DspError::Length(format!("{} samples is not a whole number of {len}-sample symbols", samples.len())));
        }
        let n = self.cfg.n_subcarriers;
        let rows = samples.len() / len;
        let mut grid = Array2::zeros((rows, n));
        for (r, sym) in samples.chunks_exact(len).enumerate() {
            let mut body = sym[self.cfg.cp_length..].to_vec();
            self.dft.forward(&mut body);
            grid.row_mut(r).iter_mut().zip(body).for_each(|(g, v)| *g = v);
        }
        Ok(grid)
    }
}

pub fn ofdm_modulate<T: Real>(grid: &Array2<Complex<T>>, cfg: &OfdmConfig, sample_rate: f64) -> Result<IqBuffer<T>> {
    IqBuffer::new(OfdmModem::new(cfg)?.modulate(grid)?, sample_rate, 0)
}

pub fn ofdm_demodulate<T: Real>(buffer: &IqBuffer<T>, cfg: &OfdmConfig) -> Result<Array2<Complex<T>>> {
    OfdmModem::new(cfg)?.demodulate(buffer.samples())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmWaveformConfig {
    pub sample_rate: f64,
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub modulation: Modulation,
    pub gain_db: f64,
    pub carrier_offset: f64,
    pub seed: u64,
}

impl Default for OfdmWaveformConfig {
    fn default() -> Self {
        Self {
            sample_rate: 1e6,
            n_subcarriers: 64,
            cp_length: 16,
            modulation: Modulation::Qpsk,
            gain_db: 0.0,
            carrier_offset: 0.0,
            seed: 0,
        }
    }
}

/// Random constellation symbols on every active subcarrier, one OFDM symbol
/// per frame, scaled to unit average power.
pub struct OfdmFrames<T: Real> {
    modem: OfdmModem<T>,
    constellation: Constellation<T>,
    source: SymbolSource,
    norm: T,
}

impl<T: Real> OfdmFrames<T> {
    pub fn new(cfg: &OfdmConfig, modulation: Modulation, source: SymbolSource) -> Result<Self> {
        let modem = OfdmModem::new(cfg)?;
        if cfg.n_active() == 0 {
            return Err(DspError::Config("no active subcarriers".into()));
        }
        let norm = T::lit((cfg.n_subcarriers as f64 / cfg.n_active() as f64).sqrt());
        Ok(Self { modem, constellation: modulation.constellation(), source, norm })
    }
}

impl<T: Real> FrameLogic<T> for OfdmFrames<T> {
    fn next_frame(&mut self, out: &mut Vec<Complex<T>>) {
        let zero = Complex::new(T::zero(), T::zero());
        let row: Vec<Complex<T>> = self
            .modem
            .config()
            .active_mask
            .iter()
            .map(|&a| if a { self.source.next_symbol(&self.constellation) * self.norm } else { zero })
            .collect();
        self.modem.modulate_symbol(ArrayView1::from(&row[..]), out).expect("row follows the modem's own mask");
    }
}

/// Continuous OFDM stream: [`OfdmFrames`] through the wideband chain.
pub struct OfdmGenerator<T: Real>(WidebandChain<T>);

impl<T: Real> OfdmGenerator<T> {
    pub fn new(cfg: &OfdmWaveformConfig) -> Result<Self> {
        let frames = OfdmFrames::new(
            &OfdmConfig::new(cfg.n_subcarriers, cfg.cp_length)?,
            cfg.modulation,
            SymbolSource::seeded(cfg.seed),
        )?;
        let chain = WidebandChainConfig {
            sample_rate: cfg.sample_rate,
            gain_db: cfg.gain_db,
            carrier_offset: cfg.carrier_offset,
        };
        Ok(Self(WidebandChain::new(&chain, Box::new(frames))?))
    }
}

impl<T: Real> SampleSource<T> for OfdmGenerator<T> {
    fn sample_rate(&self) -> f64 {
        self.0.sample_rate()
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        self.0.fill(out)
    }
}

pub fn gen_ofdm<T: Real>(cfg: &OfdmWaveformConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer(&mut OfdmGenerator::<T>::new(cfg)?, n_samples)
}
