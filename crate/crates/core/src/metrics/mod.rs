//! I/Q-domain evaluation: access-symbol error rate, KL divergence between
//! sample distributions, and frame-level link throughput.

mod aser;
mod kld;
mod trial;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::rng;
use crate::signal::{Constellation, Modulation};
use crate::waveform::SymbolSource;
use crate::Real;

pub use aser::{compute_aser, least_squares_gain, qpsk_ser};
pub use kld::{compute_kld, kld_samples, KldConfig};
pub use trial::{run_link_trial, run_link_trial_captured, LinkConfig, LinkTrial, WindowCapture};

pub const DEFAULT_PREAMBLE_LEN: usize = 64;
pub const DEFAULT_PREAMBLE_SEED: u64 = 0x5EED_AC55;

/// Known symbols at the head of every frame.
#[derive(Debug, Clone)]
pub struct AccessPreamble<T: Real> {
    symbols: Vec<Complex<T>>,
    constellation: Constellation<T>,
}

impl<T: Real> AccessPreamble<T> {
    pub fn new(symbols: Vec<Complex<T>>, constellation: Constellation<T>) -> Result<Self> {
        if symbols.len() < 16 {
            return Err(DspError::Length(format!("preamble needs at least 16 symbols, got {}", symbols.len())));
        }
        Ok(Self { symbols, constellation })
    }

    /// `len` symbols of `modulation` drawn from a seeded stream.
    pub fn seeded(modulation: Modulation, len: usize, seed: u64) -> Result<Self> {
        let constellation = modulation.constellation();
        let mut src = SymbolSource::Seeded(rng::seeded(seed, rng::stream::PREAMBLE));
        let symbols = (0..len).map(|_| src.next_symbol(&constellation)).collect();
        Self::new(symbols, constellation)
    }

    pub fn symbols(&self) -> &[Complex<T>] {
        &self.symbols
    }

    pub fn constellation(&self) -> &Constellation<T> {
        &self.constellation
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl<T: Real> Default for AccessPreamble<T> {
    fn default() -> Self {
        Self::seeded(Modulation::Qpsk, DEFAULT_PREAMBLE_LEN, DEFAULT_PREAMBLE_SEED).expect("64 >= 16")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsContext {
    pub scene: String,
    /// Interferer to receiver, metres.
    pub distance_m: f64,
    pub waveform_ids: Vec<String>,
    pub gains_db: Vec<f64>,
    pub modulations: Vec<String>,
}

/// Per-window evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Sample index of the window start.
    pub timestamp: u64,
    pub aser: f64,
    /// Nats; absent when the window holds too few samples.
    pub kld: Option<f64>,
    /// Bits per second.
    pub throughput: f64,
    pub context: MetricsContext,
}
