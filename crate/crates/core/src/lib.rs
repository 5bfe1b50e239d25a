//! Baseband DSP core for the stormbench interference platform.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below name the common instantiations.

pub mod chain;
pub mod channel;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod spectrum;
pub mod waveform;

pub use error::{DspError, Result};
pub use num_complex::Complex;
pub use scalar::Real;

pub type IqBuffer64 = signal::IqBuffer<f64>;
pub type IqBuffer32 = signal::IqBuffer<f32>;
pub type Constellation64 = signal::Constellation<f64>;
