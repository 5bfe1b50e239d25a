use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::signal::IqBuffer;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldConfig {
    pub bins_per_axis: usize,
    /// Probability mass added to every bin before renormalizing.
    pub smoothing: f64,
}

impl Default for KldConfig {
    fn default() -> Self {
        Self { bins_per_axis: 32, smoothing: 1e-6 }
    }
}

impl KldConfig {
    pub fn min_samples(&self) -> usize {
        10 * self.bins_per_axis * self.bins_per_axis
    }
}

fn histogram<T: Real>(x: &[Complex<T>], bins: usize, range: f64, smoothing: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins * bins];
    let width = 2.0 * range / bins as f64;
    let index = |v: f64| (((v + range) / width).floor().max(0.0) as usize).min(bins - 1);
    for s in x {
        h[index(s.re.as_f64()) * bins + index(s.im.as_f64())] += 1.0;
    }
    let n = x.len() as f64;
    let norm = 1.0 + smoothing * (bins * bins) as f64;
    h.iter_mut().for_each(|c| *c = (*c / n + smoothing) / norm);
    h
}

/// `D(P_rx ‖ Q_ref)` in nats between 2-D I/Q histograms over
/// `[−R, R]²`, `R` = 4 × RMS of the reference.
pub fn kld_samples<T: Real>(rx: &[Complex<T>], reference: &[Complex<T>], cfg: KldConfig) -> Result<f64> {
    if cfg.bins_per_axis == 0 || !(cfg.smoothing > 0.0) {
        return Err(DspError::Config("KLD needs at least one bin and positive smoothing".into()));
    }
    let needed = cfg.min_samples();
    for len in [rx.len(), reference.len()] {
        if len < needed {
            return Err(DspError::InsufficientData { needed, got: len });
        }
    }
    let rms = (reference.iter().map(|s| s.norm_sqr().as_f64()).sum::<f64>() / reference.len() as f64).sqrt();
    if !(rms > 0.0) {
        return Err(DspError::Range("reference capture has zero power".into()));
    }
    let range = 4.0 * rms;
    let p = histogram(rx, cfg.bins_per_axis, range, cfg.smoothing);
    let q = histogram(reference, cfg.bins_per_axis, range, cfg.smoothing);
    let d: f64 = p.iter().zip(&q).map(|(&p, &q)| p * (p / q).ln()).sum();
    Ok(d.max(0.0))
}

pub fn compute_kld<T: Real>(rx: &IqBuffer<T>, reference: &IqBuffer<T>, cfg: KldConfig) -> Result<f64> {
    kld_samples(rx.samples(), reference.samples(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adequacy_enforced() {
        let x = vec![Complex::new(1.0f64, 0.0); 10_239];
        assert_eq!(
            kld_samples(&x, &x, KldConfig::default()),
            Err(DspError::InsufficientData { needed: 10_240, got: 10_239 })
        );
    }

    #[test]
    fn identical_inputs_give_zero() {
        let x: Vec<Complex<f64>> = (0..20_000).map(|n| Complex::from_polar(1.0, n as f64)).collect();
        assert!(kld_samples(&x, &x, KldConfig::default()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn histogram_mass_is_one() {
        let x: Vec<Complex<f64>> = (0..500).map(|n| Complex::new(n as f64, -(n as f64))).collect();
        let h = histogram(&x, 8, 10.0, 1e-3);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
