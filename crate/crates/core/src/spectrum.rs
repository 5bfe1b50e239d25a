//! Welch power spectral density estimation and band measurements.

use std::f64::consts::TAU;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::signal::IqBuffer;
use crate::Real;

pub const DEFAULT_FFT_SIZE: usize = 1024;
pub const DEFAULT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
    Hamming,
    Blackman,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = TAU * i as f64 / nf;
                match self {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::Hann => 0.5 - 0.5 * x.cos(),
                    WindowKind::Hamming => 0.54 - 0.46 * x.cos(),
                    WindowKind::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

/// One PSD estimate. Bins run from `-fs/2` upward in steps of
/// `bin_spacing`; bin `k` is centred at `center_offset + (k - N/2)·bin_spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFrame {
    pub psd_bins: Vec<f64>,
    pub bin_spacing: f64,
    pub center_offset: f64,
    pub timestamp: u64,
    pub window_id: u64,
}

impl SpectrumFrame {
    pub fn len(&self) -> usize {
        self.psd_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd_bins.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.center_offset + (bin as f64 - (self.psd_bins.len() / 2) as f64) * self.bin_spacing
    }

    pub fn bin_of(&self, freq: f64) -> usize {
        let k = ((freq - self.center_offset) / self.bin_spacing).round() as i64 + (self.psd_bins.len() / 2) as i64;
        k.clamp(0, self.psd_bins.len() as i64 - 1) as usize
    }

    /// Σ psd · bin_spacing.
    pub fn total_power(&self) -> f64 {
        self.psd_bins.iter().sum::<f64>() * self.bin_spacing
    }

    /// Power in bins whose centres lie in `[lo, hi]`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        (0..self.len())
            .filter(|&k| (lo..=hi).contains(&self.frequency(k)))
            .map(|k| self.psd_bins[k])
            .sum::<f64>()
            * self.bin_spacing
    }

    pub fn peak_bin(&self) -> usize {
        self.psd_bins
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    pub fn peak_frequency(&self) -> f64 {
        self.frequency(self.peak_bin())
    }

    pub fn median_bin(&self) -> f64 {
        let mut v = self.psd_bins.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    /// Width of the band holding `fraction` of the power, trimming equal
    /// shares from each edge. Returns `(bandwidth, low edge, high edge)`.
    pub fn occupied_band(&self, fraction: f64) -> (f64, f64, f64) {
        let total: f64 = self.psd_bins.iter().sum();
        if total <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let tail = (1.0 - fraction) / 2.0 * total;
        let mut acc = 0.0;
        let mut lo = 0;
        for (k, p) in self.psd_bins.iter().enumerate() {
            acc += p;
            if acc > tail {
                lo = k;
                break;
            }
        }
        acc = 0.0;
        let mut hi = self.len() - 1;
        for (k, p) in self.psd_bins.iter().enumerate().rev() {
            acc += p;
            if acc > tail {
                hi = k;
                break;
            }
        }
        let bw = (hi.saturating_sub(lo) + 1) as f64 * self.bin_spacing;
        (bw, self.frequency(lo) - self.bin_spacing / 2.0, self.frequency(hi) + self.bin_spacing / 2.0)
    }

    pub fn occupied_bandwidth(&self, fraction: f64) -> f64 {
        self.occupied_band(fraction).0
    }
}

/// Welch-averaged periodogram, scaled so `Σ psd·bin_spacing` equals the mean
/// sample power (window-corrected).
pub fn compute_psd<T: Real>(
    buffer: &IqBuffer<T>,
    fft_size: usize,
    overlap_fraction: f64,
    window_kind: WindowKind,
) -> Result<SpectrumFrame> {
    if fft_size == 0 {
        return Err(DspError::Config("fft size must be positive".into()));
    }
    if !(0.0..=0.9).contains(&overlap_fraction) {
        return Err(DspError::Range(format!("overlap must lie in [0, 0.9], got {overlap_fraction}")));
    }
    let x = buffer.samples();
    if x.len() < fft_size {
        return Err(DspError::InsufficientData { needed: fft_size, got: x.len() });
    }
    let hop = ((fft_size as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let window = window_kind.coefficients(fft_size);
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);

    let mut acc = vec![0.0f64; fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft_size];
    let mut segments = 0usize;
    let mut start = 0;
    while start + fft_size <= x.len() {
        for (dst, (s, w)) in scratch.iter_mut().zip(x[start..start + fft_size].iter().zip(&window)) {
            *dst = Complex::new(s.re.as_f64() * w, s.im.as_f64() * w);
        }
        fft.process(&mut scratch);
        for (a, v) in acc.iter_mut().zip(&scratch) {
            *a += v.norm_sqr();
        }
        segments += 1;
        start += hop;
    }

    let fs = buffer.sample_rate();
    let scale = 1.0 / (fs * window_energy * segments as f64);
    let half = fft_size / 2;
    let psd_bins = (0..fft_size).map(|k| acc[(k + fft_size - half) % fft_size] * scale).collect();
    Ok(SpectrumFrame {
        psd_bins,
        bin_spacing: fs / fft_size as f64,
        center_offset: 0.0,
        timestamp: buffer.start(),
        window_id: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone(n: usize, fs: f64, f: f64) -> IqBuffer<f64> {
        let s = (0..n).map(|k| Complex::from_polar(1.0, TAU * f * k as f64 / fs)).collect();
        IqBuffer::new(s, fs, 0).unwrap()
    }

    #[test]
    fn tone_peak_and_contrast() {
        let fs = 1e6;
        let f = 123_000.0;
        let frame = compute_psd(&tone(16384, fs, f), 1024, 0.5, WindowKind::Hann).unwrap();
        assert!((frame.peak_frequency() - f).abs() <= frame.bin_spacing);
        let contrast = 10.0 * (frame.psd_bins[frame.peak_bin()] / frame.median_bin()).log10();
        assert!(contrast >= 30.0, "contrast {contrast}");
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s: Vec<Complex<f64>> = (0..200_000)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let buf = IqBuffer::new(s, 1e6, 0).unwrap();
        let measured = buf.mean_power();
        let frame = compute_psd(&buf, 1024, 0.5, WindowKind::Hann).unwrap();
        assert!((frame.total_power() - 1.0).abs() < 0.03, "{}", frame.total_power());
        assert!((frame.total_power() - measured).abs() / measured < 0.03);
    }

    #[test]
    fn zero_buffer_gives_zero_bins() {
        let buf = IqBuffer::new(vec![Complex::new(0.0f64, 0.0); 4096], 1e6, 0).unwrap();
        let frame = compute_psd(&buf, 1024, 0.5, WindowKind::Hann).unwrap();
        assert!(frame.psd_bins.iter().all(|&p| p == 0.0));
        assert_eq!(frame.len(), 1024);
    }

    #[test]
    fn short_buffer_is_insufficient() {
        let buf = IqBuffer::new(vec![Complex::new(0.0f64, 0.0); 100], 1e6, 0).unwrap();
        assert!(matches!(
            compute_psd(&buf, 1024, 0.5, WindowKind::Hann),
            Err(DspError::InsufficientData { needed: 1024, got: 100 })
        ));
        assert!(compute_psd(&buf, 64, 0.95, WindowKind::Hann).is_err());
    }

    #[test]
    fn tone_power_sums_to_one_for_every_window() {
        for w in [WindowKind::Rectangular, WindowKind::Hann, WindowKind::Hamming, WindowKind::Blackman] {
            let frame = compute_psd(&tone(8192, 1e6, 250_000.0), 512, 0.0, w).unwrap();
            assert!((frame.total_power() - 1.0).abs() < 1e-9, "{w:?}");
        }
    }

    #[test]
    fn frequency_axis_is_centred() {
        let frame = compute_psd(&tone(1024, 1024.0, 0.0), 1024, 0.0, WindowKind::Rectangular).unwrap();
        assert_eq!(frame.frequency(512), 0.0);
        assert_eq!(frame.frequency(0), -512.0);
        assert_eq!(frame.peak_bin(), 512);
        assert_eq!(frame.bin_of(100.0), 612);
    }
}
