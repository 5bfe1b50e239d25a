use std::f64::consts::{PI, TAU};

use num_complex::Complex;

use super::IqBuffer;
use crate::error::{DspError, Result};
use crate::Real;

/// Samples between automatic re-anchoring of the phase; keeps the phase
/// argument small without making output depend on call boundaries.
const ANCHOR_INTERVAL: u64 = 1 << 16;

/// Numerically-controlled oscillator. Phase at sample `n` after the last
/// anchor is `anchor + 2π·f·n/fs`, evaluated directly rather than accumulated.
#[derive(Debug, Clone)]
pub struct Nco {
    sample_rate: f64,
    freq: f64,
    anchor: f64,
    since_anchor: u64,
}

impl Nco {
    pub fn new(sample_rate: f64, freq: f64, initial_phase: f64) -> Result<Self> {
        check_nyquist(freq, sample_rate)?;
        Ok(Self { sample_rate, freq, anchor: wrap(initial_phase), since_anchor: 0 })
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn phase(&self) -> f64 {
        self.anchor + TAU * self.freq * self.since_anchor as f64 / self.sample_rate
    }

    /// Changes frequency from the next sample on, keeping phase continuous.
    pub fn retune(&mut self, freq: f64) -> Result<()> {
        check_nyquist(freq, self.sample_rate)?;
        self.reanchor();
        self.freq = freq;
        Ok(())
    }

    fn reanchor(&mut self) {
        self.anchor = wrap(self.phase());
        self.since_anchor = 0;
    }

    /// Current phasor, then advance one sample.
    #[inline]
    pub fn next_phase(&mut self) -> f64 {
        if self.since_anchor == ANCHOR_INTERVAL {
            self.reanchor();
        }
        let p = self.phase();
        self.since_anchor += 1;
        p
    }

    #[inline]
    pub fn next<T: Real>(&mut self) -> Complex<T> {
        let (s, c) = self.next_phase().sin_cos();
        Complex::new(T::lit(c), T::lit(s))
    }

    pub fn mix_in_place<T: Real>(&mut self, samples: &mut [Complex<T>]) {
        if self.freq == 0.0 && self.anchor == 0.0 {
            self.since_anchor += samples.len() as u64;
            return;
        }
        for s in samples {
            *s = *s * self.next::<T>();
        }
    }
}

fn check_nyquist(freq: f64, sample_rate: f64) -> Result<()> {
    if !(freq.is_finite() && freq.abs() < sample_rate / 2.0) {
        return Err(DspError::Range(format!(
            "frequency {freq} Hz is outside the Nyquist band of {sample_rate} Hz sampling"
        )));
    }
    Ok(())
}

fn wrap(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Frequency-shifts a buffer. Returns the phase the next sample would have,
/// so consecutive calls chain phase-continuously.
pub fn mix<T: Real>(buffer: &IqBuffer<T>, freq_offset: f64, initial_phase: f64) -> Result<(IqBuffer<T>, f64)> {
    let mut nco = Nco::new(buffer.sample_rate(), freq_offset, initial_phase)?;
    let mut out = buffer.samples().to_vec();
    if freq_offset == 0.0 && initial_phase == 0.0 {
        return Ok((buffer.clone(), 0.0));
    }
    nco.mix_in_place(&mut out);
    Ok((buffer.with_samples(out), wrap(nco.phase())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize, fs: f64) -> IqBuffer<f64> {
        IqBuffer::new(vec![Complex::new(1.0, 0.0); n], fs, 0).unwrap()
    }

    #[test]
    fn zero_offset_is_identity() {
        let b = IqBuffer::new(vec![Complex::new(0.2, 0.9), Complex::new(-1.0, 0.5)], 1e6, 7).unwrap();
        let (out, phase) = mix(&b, 0.0, 0.0).unwrap();
        assert_eq!(out, b);
        assert_eq!(phase, 0.0);
    }

    #[test]
    fn beyond_nyquist_is_range_error() {
        let b = ones(4, 1e6);
        assert!(matches!(mix(&b, 5e5, 0.0), Err(DspError::Range(_))));
        assert!(matches!(mix(&b, -6e5, 0.0), Err(DspError::Range(_))));
    }

    #[test]
    fn constant_input_becomes_exponential() {
        let fs = 1e6;
        let f = 123_456.0;
        let (out, _) = mix(&ones(1000, fs), f, 0.25).unwrap();
        for (n, s) in out.samples().iter().enumerate() {
            let expect = Complex::from_polar(1.0, TAU * f * n as f64 / fs + 0.25);
            assert!((s - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn chained_calls_match_single_call() {
        let fs = 1e6;
        let f = -187_500.3;
        let data: Vec<Complex<f64>> = (0..5000).map(|k| Complex::new((k as f64 * 0.01).cos(), 0.3)).collect();
        let whole = IqBuffer::new(data.clone(), fs, 0).unwrap();
        let (single, _) = mix(&whole, f, 1.0).unwrap();
        let a = IqBuffer::new(data[..1733].to_vec(), fs, 0).unwrap();
        let b = IqBuffer::new(data[1733..].to_vec(), fs, 1733).unwrap();
        let (ma, phase) = mix(&a, f, 1.0).unwrap();
        let (mb, _) = mix(&b, f, phase).unwrap();
        for (x, y) in ma.samples().iter().chain(mb.samples()).zip(single.samples()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn preserves_magnitude() {
        let data: Vec<Complex<f64>> = (0..3000).map(|k| Complex::new(k as f64 * 1e-3, -0.5)).collect();
        let b = IqBuffer::new(data, 2e6, 0).unwrap();
        let (out, _) = mix(&b, 333_333.0, -2.0).unwrap();
        for (x, y) in out.samples().iter().zip(b.samples()) {
            assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn retune_is_phase_continuous() {
        let mut nco = Nco::new(1e6, 1e3, 0.0).unwrap();
        for _ in 0..100 {
            nco.next_phase();
        }
        let before = nco.phase();
        nco.retune(2e3).unwrap();
        assert!((wrap(nco.phase() - before)).abs() < 1e-12);
    }
}
