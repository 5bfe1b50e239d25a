//! Baseband building blocks shared by every waveform: sample buffers,
//! constellations, pulse shaping, oscillators and gain.

mod buffer;
mod constellation;
mod gain;
mod nco;
mod pulse;

pub use buffer::{IqBuffer, StreamClock};
pub use constellation::{gray_decode, gray_encode, map_bits, Constellation, Modulation};
pub use gain::{apply_gain, db_to_amplitude, db_to_power, power_to_db, GainSetting};
pub use nco::{mix, Nco};
pub use pulse::{
    matched_filter_symbols, DEFAULT_ROLLOFF, DEFAULT_SPAN, DEFAULT_SPS, pulse_shape, MatchedFilter, PulseShaper, RootRaisedCosine};

use num_complex::Complex;

use crate::Real;

/// Mean of |x|² over a slice; zero for an empty slice.
pub fn mean_power<T: Real>(samples: &[Complex<T>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|s| s.norm_sqr().as_f64()).sum();
    sum / samples.len() as f64
}

pub fn energy<T: Real>(samples: &[Complex<T>]) -> f64 {
    samples.iter().map(|s| s.norm_sqr().as_f64()).sum()
}
