//! Simulated RF environment: log-distance path loss, tapped-delay-line
//! multipath and complex AWGN, superposed at one receiver.
//!
//! Losses are relative to the reference distance; no absolute carrier
//! dependent loss is modelled.

use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::rng::{self, Rng};
use crate::signal::{db_to_amplitude, IqBuffer};
use crate::waveform::SampleSource;
use crate::Real;

/// One multipath component: delay in samples and complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay: usize,
    pub re: f64,
    pub im: f64,
}

impl Tap {
    pub fn new(delay: usize, gain: Complex<f64>) -> Self {
        Self { delay, re: gain.re, im: gain.im }
    }

    pub fn gain(&self) -> Complex<f64> {
        Complex::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Metres.
    pub distance: f64,
    /// Metres.
    pub reference_distance: f64,
    pub path_loss_exponent: f64,
    /// Empty means a single unit tap at delay 0.
    #[serde(default)]
    pub multipath_taps: Vec<Tap>,
    /// Noise power per Hz, relative to unit signal power.
    #[serde(default)]
    pub noise_psd: f64,
}

impl ChannelModel {
    /// Line of sight at the given geometry, no noise.
    pub fn free_space(distance: f64, reference_distance: f64, path_loss_exponent: f64) -> Self {
        Self { distance, reference_distance, path_loss_exponent, multipath_taps: Vec::new(), noise_psd: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_distance > 0.0 && self.distance >= self.reference_distance) {
            return Err(DspError::Config(format!(
                "need distance >= reference_distance > 0, got {} and {}",
                self.distance, self.reference_distance
            )));
        }
        if !(1.5..=6.0).contains(&self.path_loss_exponent) {
            return Err(DspError::Range(format!(
                "path loss exponent {} outside [1.5, 6]",
                self.path_loss_exponent
            )));
        }
        if self.multipath_taps.windows(2).any(|w| w[1].delay <= w[0].delay) {
            return Err(DspError::Config("tap delays must be strictly increasing".into()));
        }
        if !(self.noise_psd >= 0.0 && self.noise_psd.is_finite()) {
            return Err(DspError::Range(format!("noise psd {} must be finite and >= 0", self.noise_psd)));
        }
        Ok(())
    }

    pub fn path_loss_db(&self) -> f64 {
        10.0 * self.path_loss_exponent * (self.distance / self.reference_distance).log10()
    }

    fn taps(&self) -> Vec<Tap> {
        if self.multipath_taps.is_empty() {
            vec![Tap::new(0, Complex::new(1.0, 0.0))]
        } else {
            self.multipath_taps.clone()
        }
    }

    pub fn max_delay(&self) -> usize {
        self.multipath_taps.last().map_or(0, |t| t.delay)
    }

    /// Σ|g|² over the taps.
    pub fn multipath_power(&self) -> f64 {
        self.taps().iter().map(|t| t.gain().norm_sqr()).sum()
    }

    /// Delay of the strongest tap; the genie timing reference.
    pub fn main_delay(&self) -> usize {
        self.taps()
            .iter()
            .max_by(|a, b| a.gain().norm_sqr().total_cmp(&b.gain().norm_sqr()))
            .map_or(0, |t| t.delay)
    }

    pub fn with_distance(&self, distance: f64) -> Self {
        Self { distance, ..self.clone() }
    }
}

/// Streaming path loss and multipath; carries the delay-line tail between
/// blocks.
#[derive(Debug, Clone)]
pub struct Propagator<T: Real> {
    taps: Vec<(usize, Complex<T>)>,
    tail: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> Propagator<T> {
    pub fn new(model: &ChannelModel) -> Result<Self> {
        model.validate()?;
        let amp = db_to_amplitude(-model.path_loss_db());
        let taps = model
            .taps()
            .iter()
            .map(|t| (t.delay, Complex::new(T::lit(t.re * amp), T::lit(t.im * amp))))
            .collect();
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self { taps, tail: vec![zero; model.max_delay()], scratch: Vec::new() })
    }

    /// Replaces `block` with the channel output for it.
    pub fn process(&mut self, block: &mut [Complex<T>]) {
        let d = self.tail.len();
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.tail);
        self.scratch.extend_from_slice(block);
        for (n, y) in block.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for &(delay, g) in &self.taps {
                acc = acc + self.scratch[n + d - delay] * g;
            }
            *y = acc;
        }
        let len = self.scratch.len();
        self.tail.copy_from_slice(&self.scratch[len - d..]);
    }
}

/// Applies `model` to a finite buffer with zero history before it.
pub fn propagate<T: Real>(signal: &IqBuffer<T>, model: &ChannelModel) -> Result<IqBuffer<T>> {
    if !signal.is_empty() && model.max_delay() >= signal.len() {
        return Err(DspError::Length(format!(
            "tap delay {} is not shorter than the {}-sample buffer",
            model.max_delay(),
            signal.len()
        )));
    }
    let mut p = Propagator::new(model)?;
    let mut out = signal.samples().to_vec();
    p.process(&mut out);
    Ok(signal.with_samples(out))
}

/// Seeded complex white Gaussian noise of a given total power.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: Rng,
    sigma: f64,
}

impl NoiseSource {
    pub fn new(power: f64, seed: u64) -> Self {
        Self::from_rng(power, rng::seeded(seed, rng::stream::NOISE))
    }

    pub fn from_rng(power: f64, rng: Rng) -> Self {
        Self { rng, sigma: (power / 2.0).sqrt() }
    }

    pub fn power(&self) -> f64 {
        2.0 * self.sigma * self.sigma
    }

    pub fn add_to<T: Real>(&mut self, block: &mut [Complex<T>]) {
        if self.sigma == 0.0 {
            return;
        }
        for s in block.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            *s = *s + Complex::new(T::lit(re * self.sigma), T::lit(im * self.sigma));
        }
    }
}

/// Interferer distances for a sweep, in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweep {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl DistanceSweep {
    pub fn distances(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub label: String,
    pub description: String,
    /// Simulation rate the calibration assumes, Hz.
    pub sample_rate: f64,
    /// Link transmit level relative to unit power, dB.
    pub link_power_db: f64,
    /// Interferer transmit gain the scene is calibrated for, dB.
    pub interference_gain_db: f64,
    /// The receiver noise comes from `tx_rx.noise_psd`.
    pub tx_rx: ChannelModel,
    pub interferer_rx: ChannelModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferer_sweep: Option<DistanceSweep>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        crate::waveform::check_rate(self.sample_rate)?;
        self.tx_rx.validate()?;
        self.interferer_rx.validate()
    }

    pub fn noise_power(&self) -> f64 {
        self.tx_rx.noise_psd * self.sample_rate
    }

    /// Received link power over noise, dB.
    pub fn snr_db(&self) -> f64 {
        self.link_power_db - self.tx_rx.path_loss_db() + 10.0 * self.tx_rx.multipath_power().log10()
            - 10.0 * self.noise_power().log10()
    }

    /// Received link over interference power for an interferer transmitting
    /// at `interference_gain_db`, dB.
    pub fn sir_db(&self, interference_gain_db: f64) -> f64 {
        (self.link_power_db - self.tx_rx.path_loss_db() + 10.0 * self.tx_rx.multipath_power().log10())
            - (interference_gain_db - self.interferer_rx.path_loss_db()
                + 10.0 * self.interferer_rx.multipath_power().log10())
    }

    /// SIR at the calibrated interference gain.
    pub fn preset_sir_db(&self) -> f64 {
        self.sir_db(self.interference_gain_db)
    }

    pub fn with_interferer_distance(&self, distance: f64) -> Self {
        Self { interferer_rx: self.interferer_rx.with_distance(distance), ..self.clone() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "scenario1" => Some(scenario1()),
            "scenario2" => Some(scenario2()),
            "scenario3" => Some(scenario3()),
            _ => None,
        }
    }
}

pub const PRESET_RATE: f64 = 250e3;

fn noise_psd_for(snr_db: f64, link_power_db: f64, link: &ChannelModel) -> f64 {
    let rx_db = link_power_db - link.path_loss_db() + 10.0 * link.multipath_power().log10();
    10f64.powf((rx_db - snr_db) / 10.0) / PRESET_RATE
}

/// 25 m link, interferer 5 m from the receiver, cluttered multipath.
pub fn scenario1() -> SceneConfig {
    let taps = (0..6)
        .map(|i| {
            let delay = [0, 1, 2, 4, 6, 9][i];
            let mag = 0.2 * (-(i as f64) * 0.5).exp();
            let mag = if i == 0 { 1.0 } else { mag };
            Tap::new(delay, Complex::from_polar(mag, 0.9 * i as f64))
        })
        .collect();
    let mut tx_rx = ChannelModel { multipath_taps: taps, ..ChannelModel::free_space(25.0, 1.0, 3.2) };
    let interferer_rx = ChannelModel { multipath_taps: tx_rx.multipath_taps.clone(), ..ChannelModel::free_space(5.0, 1.0, 3.2) };
    tx_rx.noise_psd = noise_psd_for(30.0, 30.0, &tx_rx);
    SceneConfig {
        label: "scenario1".into(),
        description: "25 m link with the interferer 5 m from the receiver; multipath-rich clutter".into(),
        sample_rate: PRESET_RATE,
        link_power_db: 30.0,
        interference_gain_db: 15.0,
        tx_rx,
        interferer_rx,
        interferer_sweep: None,
    }
}

/// 40 m link, interferer 15 m from the receiver, cleaner propagation.
pub fn scenario2() -> SceneConfig {
    let taps = vec![Tap::new(0, Complex::new(1.0, 0.0)), Tap::new(3, Complex::from_polar(0.1, 2.0))];
    let mut tx_rx = ChannelModel { multipath_taps: taps, ..ChannelModel::free_space(40.0, 1.0, 2.1) };
    let interferer_rx = ChannelModel { multipath_taps: tx_rx.multipath_taps.clone(), ..ChannelModel::free_space(15.0, 1.0, 2.1) };
    tx_rx.noise_psd = noise_psd_for(30.0, 20.0, &tx_rx);
    SceneConfig {
        label: "scenario2".into(),
        description: "40 m link with the interferer 15 m from the receiver; two-ray propagation".into(),
        sample_rate: PRESET_RATE,
        link_power_db: 20.0,
        interference_gain_db: 15.0,
        tx_rx,
        interferer_rx,
        interferer_sweep: None,
    }
}

/// Air-to-air link with the interferer swept from 20 m to 100 m.
pub fn scenario3() -> SceneConfig {
    let mut tx_rx = ChannelModel::free_space(20.0, 1.0, 2.0);
    // noise-limited at range, so the far end of the sweep settles onto the
    // interference-free reference
    tx_rx.noise_psd = noise_psd_for(8.0, 8.0, &tx_rx);
    SceneConfig {
        label: "scenario3".into(),
        description: "air-to-air link at 20 m; interferer distance swept 20 m to 100 m".into(),
        sample_rate: PRESET_RATE,
        link_power_db: 8.0,
        interference_gain_db: 15.0,
        tx_rx,
        interferer_rx: ChannelModel::free_space(20.0, 1.0, 2.0),
        interferer_sweep: Some(DistanceSweep { start: 20.0, end: 100.0, step: 10.0 }),
    }
}

/// Streaming receiver: link and interference through their channels plus
/// noise.
pub struct Receiver<T: Real> {
    link: Propagator<T>,
    interference: Propagator<T>,
    noise: NoiseSource,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> Receiver<T> {
    pub fn new(scene: &SceneConfig, seed: u64) -> Result<Self> {
        scene.validate()?;
        Ok(Self {
            link: Propagator::new(&scene.tx_rx)?,
            interference: Propagator::new(&scene.interferer_rx)?,
            noise: NoiseSource::new(scene.noise_power(), seed),
            scratch: Vec::new(),
        })
    }

    /// Without noise.
    pub fn noiseless(scene: &SceneConfig) -> Result<Self> {
        let mut r = Self::new(scene, 0)?;
        r.noise = NoiseSource::new(0.0, 0);
        Ok(r)
    }

    /// Overwrites `link` with the received block.
    pub fn process(&mut self, link: &mut [Complex<T>], interference: &[Complex<T>]) {
        self.link.process(link);
        self.scratch.clear();
        self.scratch.extend_from_slice(interference);
        self.interference.process(&mut self.scratch);
        for (y, i) in link.iter_mut().zip(&self.scratch) {
            *y = *y + *i;
        }
        self.noise.add_to(link);
    }

    /// Like [`process`](Self::process) with a silent interferer.
    pub fn process_link_only(&mut self, link: &mut [Complex<T>]) {
        self.link.process(link);
        self.noise.add_to(link);
    }
}

/// Received superposition of two aligned buffers.
pub fn receive<T: Real>(
    link: &IqBuffer<T>,
    interference: &IqBuffer<T>,
    scene: &SceneConfig,
    seed: u64,
) -> Result<IqBuffer<T>> {
    if link.sample_rate() != interference.sample_rate() {
        return Err(DspError::Config(format!(
            "sample rates differ: link {} Hz, interference {} Hz",
            link.sample_rate(),
            interference.sample_rate()
        )));
    }
    if link.start() != interference.start() || link.len() != interference.len() {
        return Err(DspError::Config("link and interference buffers are not aligned".into()));
    }
    let scene = SceneConfig { sample_rate: link.sample_rate(), ..scene.clone() };
    let mut rx = Receiver::new(&scene, seed)?;
    let mut out = link.samples().to_vec();
    rx.process(&mut out, interference.samples());
    Ok(link.with_samples(out))
}

/// Interference from a live source, ready to feed a [`Receiver`].
pub fn next_block<T: Real>(source: &mut dyn SampleSource<T>, n: usize, buf: &mut Vec<Complex<T>>) {
    buf.resize(n, Complex::new(T::zero(), T::zero()));
    source.fill(buf);
}
