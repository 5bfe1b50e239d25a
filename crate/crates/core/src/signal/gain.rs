use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::IqBuffer;
use crate::Real;

/// Gain in dB relative to unit average power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSetting {
    pub gain_db: f64,
}

impl GainSetting {
    pub const UNITY: GainSetting = GainSetting { gain_db: 0.0 };

    pub fn new(gain_db: f64) -> Self {
        Self { gain_db }
    }

    pub fn amplitude(self) -> f64 {
        db_to_amplitude(self.gain_db)
    }

    pub fn power(self) -> f64 {
        db_to_power(self.gain_db)
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn apply_gain<T: Real>(buffer: &IqBuffer<T>, gain: GainSetting) -> IqBuffer<T> {
    let a = T::lit(gain.amplitude());
    buffer.with_samples(buffer.samples().iter().map(|&s| s * a).collect::<Vec<Complex<T>>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<Complex<f64>>) -> IqBuffer<f64> {
        IqBuffer::new(samples, 1e6, 0).unwrap()
    }

    #[test]
    fn zero_db_is_identity() {
        let b = buf(vec![Complex::new(0.3, -0.7), Complex::new(1.0, 2.0)]);
        assert_eq!(apply_gain(&b, GainSetting::new(0.0)), b);
    }

    #[test]
    fn twenty_db_is_times_ten() {
        let b = buf(vec![Complex::new(0.5, -0.25)]);
        let out = apply_gain(&b, GainSetting::new(20.0));
        assert!((out.samples()[0] - Complex::new(5.0, -2.5)).norm() < 1e-12);
    }

    #[test]
    fn five_db_on_unit_power() {
        let b = buf((0..1000).map(|k| Complex::from_polar(1.0, k as f64 * 0.1)).collect());
        let p = apply_gain(&b, GainSetting::new(5.0)).mean_power();
        let expected = 10f64.powf(0.5);
        assert!((p - expected).abs() < 1e-6);
        assert!((p - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn gain_then_inverse_gain() {
        let b = buf((0..64).map(|k| Complex::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect());
        for g in [-30.0, -5.5, 0.0, 7.25, 25.0] {
            let back = apply_gain(&apply_gain(&b, GainSetting::new(g)), GainSetting::new(-g));
            for (x, y) in back.samples().iter().zip(b.samples()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
