use num_complex::Complex;

use crate::error::{DspError, Result};
use crate::Real;

/// A block of complex baseband samples stamped with its position in the
/// stream (`start`, in samples since the stream epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer<T> {
    samples: Vec<Complex<T>>,
    sample_rate: f64,
    start: u64,
}

impl<T: Real> IqBuffer<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: f64, start: u64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(DspError::Range(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { samples, sample_rate, start })
    }

    pub fn empty(sample_rate: f64, start: u64) -> Result<Self> {
        Self::new(Vec::new(), sample_rate, start)
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    /// Index one past the last sample.
    pub fn end(&self) -> u64 {
        self.start + self.samples.len() as u64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean_power(&self) -> f64 {
        super::mean_power(&self.samples)
    }

    /// True when `self` starts exactly where `prev` ended.
    pub fn follows(&self, prev: &IqBuffer<T>) -> bool {
        self.start == prev.end() && self.sample_rate == prev.sample_rate
    }

    /// Same stamping, new samples.
    pub fn with_samples(&self, samples: Vec<Complex<T>>) -> Self {
        Self { samples, sample_rate: self.sample_rate, start: self.start }
    }
}

/// Stamps consecutive sample blocks so they form a gap-free stream.
#[derive(Debug, Clone)]
pub struct StreamClock {
    sample_rate: f64,
    next: u64,
}

impl StreamClock {
    pub fn new(sample_rate: f64) -> Result<Self> {
        Self::starting_at(sample_rate, 0)
    }

    pub fn starting_at(sample_rate: f64, next: u64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(DspError::Range(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { sample_rate, next })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Index the next stamped block will start at.
    pub fn position(&self) -> u64 {
        self.next
    }

    pub fn seconds(&self) -> f64 {
        self.next as f64 / self.sample_rate
    }

    pub fn stamp<T: Real>(&mut self, samples: Vec<Complex<T>>) -> IqBuffer<T> {
        let start = self.next;
        self.next += samples.len() as u64;
        IqBuffer { samples, sample_rate: self.sample_rate, start }
    }
}
