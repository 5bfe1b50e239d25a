use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Real;

/// Forward and inverse DFT of one length, both scaled by 1/√N.
#[derive(Clone)]
pub(crate) struct UnitaryDft<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> UnitaryDft<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: T::lit(1.0 / (n as f64).sqrt()),
        }
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.forward.process(data);
        data.iter_mut().for_each(|x| *x = *x * self.scale);
    }

    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.inverse.process(data);
        data.iter_mut().for_each(|x| *x = *x * self.scale);
    }
}
