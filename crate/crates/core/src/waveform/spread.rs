//! Direct-sequence spread spectrum.
//!
//! The spreading code is a short code: each symbol is multiplied by the same
//! `chips_per_symbol` chips, taken cyclically from the length-31 m-sequence
//! of the LFSR `x^5 + x^3 + 1`. The seed picks the LFSR start state, i.e. the
//! cyclic shift of the sequence.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{into_buffer, samples_per_symbol, SampleSource, SymbolSource};
use crate::error::{DspError, Result};
use crate::signal::{db_to_amplitude, DEFAULT_SPAN, Constellation, IqBuffer, Modulation, Nco, PulseShaper, RootRaisedCosine};
use crate::Real;

pub const M_SEQUENCE_LEN: usize = 31;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadConfig {
    pub chips_per_symbol: usize,
    pub pn_seed: u64,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        Self { chips_per_symbol: M_SEQUENCE_LEN, pn_seed: 0 }
    }
}

/// ±1 chips of the spreading code for `cfg`.
pub fn pn_code(cfg: &SpreadConfig) -> Vec<i8> {
    let mut state = (cfg.pn_seed % 31) as u8 + 1;
    let mut seq = [0i8; M_SEQUENCE_LEN];
    for chip in seq.iter_mut() {
        let out = state & 1;
        let fb = (state ^ (state >> 3)) & 1;
        state = (state >> 1) | (fb << 4);
        *chip = 1 - 2 * out as i8;
    }
    (0..cfg.chips_per_symbol).map(|i| seq[i % M_SEQUENCE_LEN]).collect()
}

fn check(cfg: &SpreadConfig) -> Result<()> {
    if cfg.chips_per_symbol == 0 {
        return Err(DspError::Config("chips_per_symbol must be >= 1".into()));
    }
    Ok(())
}

pub fn spread_with_code<T: Real>(symbols: &[Complex<T>], code: &[i8]) -> Vec<Complex<T>> {
    symbols.iter().flat_map(|&s| code.iter().map(move |&c| s * T::lit(f64::from(c)))).collect()
}

pub fn despread_with_code<T: Real>(chips: &[Complex<T>], code: &[i8]) -> Result<Vec<Complex<T>>> {
    if code.is_empty() || chips.len() % code.len() != 0 {
        return Err(DspError::Length(format!(
            "{} chips is not a multiple of {} chips per symbol",
            chips.len(),
            code.len()
        )));
    }
    let inv = T::lit(1.0 / code.len() as f64);
    Ok(chips
        .chunks_exact(code.len())
        .map(|block| {
            // mean taken relative to the first despread chip, so a clean
            // input comes back bit-exact
            let first = block[0] * T::lit(f64::from(code[0]));
            let dev = block
                .iter()
                .zip(code)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (&x, &c)| acc + (x * T::lit(f64::from(c)) - first));
            first + dev * inv
        })
        .collect())
}

pub fn spread<T: Real>(symbols: &[Complex<T>], cfg: &SpreadConfig) -> Result<Vec<Complex<T>>> {
    check(cfg)?;
    Ok(spread_with_code(symbols, &pn_code(cfg)))
}

pub fn despread<T: Real>(chips: &[Complex<T>], cfg: &SpreadConfig) -> Result<Vec<Complex<T>>> {
    check(cfg)?;
    despread_with_code(chips, &pn_code(cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsssConfig {
    pub modulation: Modulation,
    pub spread: SpreadConfig,
    pub chip_rate: f64,
    pub sample_rate: f64,
    pub rolloff: f64,
    pub gain_db: f64,
    pub carrier_offset: f64,
    pub seed: u64,
}

impl Default for DsssConfig {
    fn default() -> Self {
        Self::at_rate(1e6)
    }
}

impl DsssConfig {
    /// Chip rate at half the sample rate, 31 chips per QPSK symbol.
    pub fn at_rate(sample_rate: f64) -> Self {
        Self {
            modulation: Modulation::Qpsk,
            spread: SpreadConfig::default(),
            chip_rate: sample_rate / 2.0,
            sample_rate,
            rolloff: 0.35,
            gain_db: 0.0,
            carrier_offset: 0.0,
            seed: 0,
        }
    }

    pub fn symbol_rate(&self) -> f64 {
        self.chip_rate / self.spread.chips_per_symbol as f64
    }
}

pub struct DsssGenerator<T: Real> {
    constellation: Constellation<T>,
    code: Vec<T>,
    shaper: PulseShaper<T>,
    source: SymbolSource,
    current: Complex<T>,
    chip_idx: usize,
    amplitude: T,
    nco: Option<Nco>,
    sample_rate: f64,
}

impl<T: Real> DsssGenerator<T> {
    pub fn new(cfg: &DsssConfig) -> Result<Self> {
        check(&cfg.spread)?;
        let sps = samples_per_symbol(cfg.sample_rate, cfg.chip_rate)?;
        // chips are never matched-filtered here, so the unrefined pulse keeps
        // the intended spectrum even at two samples per chip
        let filter = RootRaisedCosine::truncated(sps, cfg.rolloff, DEFAULT_SPAN)?;
        let nco = if cfg.carrier_offset != 0.0 { Some(Nco::new(cfg.sample_rate, cfg.carrier_offset, 0.0)?) } else { None };
        Ok(Self {
            constellation: cfg.modulation.constellation(),
            code: pn_code(&cfg.spread).into_iter().map(|c| T::lit(f64::from(c))).collect(),
            shaper: PulseShaper::new(&filter),
            source: SymbolSource::seeded(cfg.seed),
            current: Complex::new(T::zero(), T::zero()),
            chip_idx: 0,
            amplitude: T::lit(db_to_amplitude(cfg.gain_db)),
            nco,
            sample_rate: cfg.sample_rate,
        })
    }
}

impl<T: Real> SampleSource<T> for DsssGenerator<T> {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fill(&mut self, out: &mut [Complex<T>]) {
        let Self { constellation, code, shaper, source, current, chip_idx, amplitude, nco, .. } = self;
        let mut feed = || {
            if *chip_idx == 0 {
                *current = source.next_symbol(constellation);
            }
            let chip = *current * code[*chip_idx];
            *chip_idx = (*chip_idx + 1) % code.len();
            chip
        };
        for s in out.iter_mut() {
            *s = shaper.next_with(&mut feed) * *amplitude;
        }
        if let Some(nco) = nco {
            nco.mix_in_place(out);
        }
    }
}

pub fn gen_dsss<T: Real>(cfg: &DsssConfig, n_samples: usize) -> Result<IqBuffer<T>> {
    into_buffer(&mut DsssGenerator::<T>::new(cfg)?, n_samples)
}
