//! OTFS over an OFDM-style Heisenberg transform.
//!
//! Delay-Doppler grids have shape `(M, N)` indexed `[l, k]` (delay, Doppler).
//! Time-frequency grids have shape `(N, M)` indexed `[n, m]` (slot,
//! subcarrier). The ISFFT is
//! `X[n, m] = (1/√(NM)) Σ_k Σ_l x[l, k] e^{j2π(nk/N − ml/M)}`.

use ndarray::{Array2, Axis};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::dft::UnitaryDft;
use super::{into_buffer, SampleSource, SymbolSource};
use crate::chain::{FrameLogic, WidebandChain, WidebandChainConfig};
use crate::error::{DspError, Result};
use crate::signal::{Constellation, IqBuffer, Modulation};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtfsConfig {
    pub m_delay_bins: usize,
    pub n_doppler_bins: usize,
    pub cp_length: usize,
}

impl Default for OtfsConfig {
    fn default() -> Self {
        Self { m_delay_bins: 64, n_doppler_bins: 16, cp_length: 16 }
    }
}

impl OtfsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.m_delay_bins.is_power_of_two() || !self.n_doppler_bins.is_power_of_two() {
            return Err(DspError::Config(format!(
                "grid {}x{} must have power-of-two dimensions",
                self.m_delay_bins, self.n_doppler_bins
            )));
        }
        if self.cp_length >= self.m_delay_bins {
            return Err(DspError::Config(format!(
                "cp_length {} must be below m_delay_bins {}",
                self.cp_length, self.m_delay_bins
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        self.n_doppler_bins * (self.m_delay_bins + self.cp_length)
    }
}

fn transform_lanes<T: Real>(grid: &mut Array2<Complex<T>>, axis: Axis, f: impl Fn(&mut [Complex<T>])) {
    for mut lane in grid.lanes_mut(axis) {
        let mut v = lane.to_vec();
        f(&mut v);
        lane.iter_mut().zip(v).for_each(|(d, s)| *d = s);
    }
}

/// Cached DFT plans for one grid size.
#[derive(Clone)]
pub struct OtfsModem<T: Real> {
    cfg: OtfsConfig,
    dft_m: UnitaryDft<T>,
    dft_n: UnitaryDft<T>,
}

impl<T: Real> OtfsModem<T> {
    pub fn new(cfg: &OtfsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg: *cfg, dft_m: UnitaryDft::new(cfg.m_delay_bins), dft_n: UnitaryDft::new(cfg.n_doppler_bins) })
    }

    pub fn config(&self) -> &OtfsConfig {
        &self.cfg
    }

    fn check_dd(&self, dd: &Array2<Complex<T>>) -> Result<()> {
        let want = (self.cfg.m_delay_bins, self.cfg.n_doppler_bins);
        if dd.dim() != want {
            return Err(DspError::Shape(format!("delay-Doppler grid is {:?}, expected {want:?}", dd.dim())));
        }
        Ok(())
    }

    /// Delay-Doppler `(M, N)` to time-frequency `(N, M)`.
    pub fn isfft(&self, dd: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>> {
        self.check_dd(dd)?;
        let mut g = dd.clone();
        // inverse along Doppler, forward along delay
        transform_lanes(&mut g, Axis(1), |v| self.dft_n.inverse(v));
        transform_lanes(&mut g, Axis(0), |v| self.dft_m.forward(v));
        Ok(g.reversed_axes().as_standard_layout().into_owned())
    }

    /// Time-frequency `(N, M)` to delay-Doppler `(M, N)`.
    pub fn sfft(&self, tf: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>> {
        let want = (self.cfg.n_doppler_bins, self.cfg.m_delay_bins);
        if tf.dim() != want {
            return Err(DspError::Shape(format!("time-frequency grid is {:?}, expected {want:?}", tf.dim())));
        }
        let mut g = tf.t().as_standard_layout().into_owned();
        transform_lanes(&mut g, Axis(0), |v| self.dft_m.inverse(v));
        transform_lanes(&mut g, Axis(1), |v| self.dft_n.forward(v));
        Ok(g)
    }

    pub fn modulate(&self, dd: &Array2<Complex<T>>) -> Result<Vec<Complex<T>>> {
        let tf = self.isfft(dd)?;
        let (m, cp) = (self.cfg.m_delay_bins, self.cfg.cp_length);
        let mut out = Vec::with_capacity(self.cfg.frame_len());
        for row in tf.rows() {
            let mut slot = row.to_vec();
            self.dft_m.inverse(&mut slot);
            out.extend_from_slice(&slot[m - cp..]);
            out.extend_from_slice(&slot);
        }
        Ok(out)
    }

    pub fn demodulate(&self, samples: &[Complex<T>]) -> Result<Array2<Complex<T>>> {
        if samples.len() != self.cfg.frame_len() {
            return Err(DspError::Length(format!(
                "OTFS frame needs {} samples, got {}",
                self.cfg.frame_len(),
                samples.len()
            )));
        }
        let (m, cp) = (self.cfg.m_delay_bins, self.cfg.cp_length);
        let mut tf = Array2::zeros((self.cfg.n_doppler_bins, m));
        for (n, slot) in samples.chunks_exact(m + cp).enumerate() {
            let mut body = slot[cp..].to_vec();
            self.dft_m.forward(&mut body);
            tf.row_mut(n).iter_mut().zip(body).for_each(|(d, s)| *d = s);
        }
        self.sfft(&tf)
    }
}

pub fn isfft<T: Real>(dd: &Array2<Complex<T>>, cfg: &OtfsConfig) -> Result<Array2<Complex<T>>> {
    OtfsModem::new(cfg)?.isfft(dd)
}

pub fn sfft<T: Real>(tf: &Array2<Complex<T>>, cfg: &OtfsConfig) -> Result<Array2<Complex<T>>> {
    OtfsModem::new(cfg)?.sfft(tf)
}

pub fn otfs_modulate<T: Real>(dd: &Array2<Complex<T>>, cfg: &OtfsConfig, sample_rate: f64) -> Result<IqBuffer<T>> {
    IqBuffer::new(OtfsModem::new(cfg)?.modulate(dd)?, sample_rate, 0)
}

pub fn otfs_demodulate<T: Real>(buffer: &IqBuffer<T>, cfg: &OtfsConfig) -> Result<Array2<Complex<T>>> {
    OtfsModem::new(cfg)?.demodulate(buffer.samples())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtfsWaveformConfig {
    pub sample_rate: f64,
    pub m_delay_bins: usize,
    pub n_doppler_bins: usize,
    pub cp_length: usize,
    pub modulation: Modulation,
    pub gain_db: f64,
    pub carrier_offset: f64,
    pub seed: u64,
}

impl Default for OtfsWaveformConfig {
    fn default() -> Self {
        let grid = OtfsConfig::default();
        Self {
            sample_rate: 1e6,
            m_delay_bins: grid.m_delay_bins,
            n_doppler_bins: grid.n_doppler_bins,
            cp_length: grid.cp_length,
            modulation: Modulation::Qpsk,
            gain_db: 0.0,
            carrier_offset: 0.0,
            seed: 0,
        }
    }
}

impl OtfsWaveformConfig {
    pub fn grid(&self) -> OtfsConfig {
        OtfsConfig { m_delay_bins: self.m_delay_bins, n_doppler_bins: self.n_doppler_bins, cp_length: self.cp_length }
    }
}

/// One OTFS frame of random constellation symbols in every delay-Doppler bin.
pub struct OtfsFrames<T: Real> {
    modem: OtfsModem<T>,
    constellation: Constellation<T>,
    source: SymbolSource,
}

impl<T: Real> OtfsFrames<T> {
    pub fn new(cfg: &OtfsConfig, modulation: Modulation, source: SymbolSource) -> Result<Self> {
        Ok(Self { modem: OtfsModem::new(cfg)?, constellation: modulation.constellation(), source })
    }
}

impl<T: Real> FrameLogic<T> for OtfsFrames<T> {
    fn next_frame(&mut self, out: &mut Vec<Complex<T>>) {
        let c = *self.modem.config();
        let dd = Array2::from_shape_simple_fn((c.m_delay_bins, c.n_doppler_bins), || {
            self.source.next_symbol(&self.constellation)
        });
        out.extend(self.modem.modulate(&dd).expect("grid built with the modem's shape"));
    }
}

/// Continuous OTFS stream: [`OtfsFrames`] through the wideband chain.
pub struct OtfsGenerator<T: Real>(WidebandChain<T>);

impl<T: Real> OtfsGenerator<T> {
    pub fn new(cfg: &OtfsWaveformConfig) -> Result<Self> {
        let frames = OtfsFrames::new(&cfg.grid(), cfg.modulation, SymbolSource::seeded(cfg.seed))?;
        let chain = WidebandChainConfig {
            sample_rate: cfg.sample_rate,
            gain_db: cfg.gain_db,
            carrier_offset: cfg.carrier_offset,
        };
        Ok(Self(WidebandChain::new(&chain, Box::new(frames))?))
    }
}

impl<T: Real> SampleSource<T> for OtfsGenerator<T> {
    fn sample_rate(&self) -> f64 {
        self.0.sample_rate()
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        self.0.fill(out)
    }
}

pub fn gen_otfs<T: Real>(cfg: &OtfsWaveformConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer(&mut OtfsGenerator::<T>::new(cfg)?, n_samples)
}
