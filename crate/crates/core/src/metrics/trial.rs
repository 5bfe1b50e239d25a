use std::collections::VecDeque;

use num_complex::Complex;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{compute_aser, kld_samples, least_squares_gain, AccessPreamble, KldConfig, MetricsContext, MetricsRecord};
use crate::channel::{Receiver, SceneConfig};
use crate::error::{DspError, Result};
use crate::rng::{self, Rng};
use crate::signal::{db_to_amplitude, Constellation, MatchedFilter, Modulation, PulseShaper, RootRaisedCosine};
use crate::waveform::{samples_per_symbol, SampleSource};

const BLOCK: usize = 4096;

/// The victim link: framing, modulation and repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub modulation: Modulation,
    /// Payload bits per frame.
    pub frame_bits: usize,
    /// Transmissions of each payload symbol: 1, 2 or 4.
    pub repetition: usize,
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub kld: KldConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            modulation: Modulation::Qpsk,
            frame_bits: 256,
            repetition: 1,
            symbol_rate: 62.5e3,
            rolloff: 0.35,
            kld: KldConfig::default(),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4].contains(&self.repetition) {
            return Err(DspError::Config(format!("repetition must be 1, 2 or 4, got {}", self.repetition)));
        }
        if self.frame_bits == 0 {
            return Err(DspError::Config("frames need at least one payload bit".into()));
        }
        Ok(())
    }

    pub fn payload_symbols(&self) -> usize {
        self.frame_bits.div_ceil(self.modulation.bits_per_symbol())
    }

    pub fn frame_symbols(&self, preamble_len: usize) -> usize {
        preamble_len + self.payload_symbols() * self.repetition
    }

    /// Payload bits per second with every frame delivered.
    pub fn offered_load(&self, preamble_len: usize) -> f64 {
        self.symbol_rate / self.frame_symbols(preamble_len) as f64 * self.frame_bits as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTrial {
    /// Delivered payload bits per second in each one-second window. A
    /// delivered frame's bits are spread over the windows its airtime
    /// covers.
    pub throughput: Vec<f64>,
    pub records: Vec<MetricsRecord>,
    pub frames_sent: usize,
    pub frames_delivered: usize,
}

impl LinkTrial {
    pub fn mean_throughput(&self) -> f64 {
        mean(&self.throughput)
    }

    pub fn mean_aser(&self) -> f64 {
        mean(&self.records.iter().map(|r| r.aser).collect::<Vec<_>>())
    }

    pub fn with_context(mut self, context: MetricsContext) -> Self {
        self.records.iter_mut().for_each(|r| r.context = context.clone());
        self
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct Frame {
    first_symbol: u64,
    labels: Vec<usize>,
}

struct Transmitter {
    preamble: Vec<Complex<f64>>,
    constellation: Constellation<f64>,
    link: LinkConfig,
    rng: Rng,
    queue: VecDeque<Complex<f64>>,
    frames: VecDeque<Frame>,
    next_symbol: u64,
    amplitude: f64,
}

impl Transmitter {
    fn next(&mut self) -> Complex<f64> {
        if self.queue.is_empty() {
            self.start_frame();
        }
        self.next_symbol += 1;
        self.queue.pop_front().expect("frame queued") * self.amplitude
    }

    fn start_frame(&mut self) {
        let bps = self.constellation.bits_per_symbol();
        let mut bits: Vec<bool> = (0..self.link.frame_bits).map(|_| self.rng.random()).collect();
        bits.resize(self.link.payload_symbols() * bps, false);
        let labels: Vec<usize> = bits.chunks(bps).map(|b| self.constellation.label_from_bits(b)).collect();
        self.queue.extend(&self.preamble);
        for &l in &labels {
            for _ in 0..self.link.repetition {
                self.queue.push_back(self.constellation.point(l));
            }
        }
        self.frames.push_back(Frame { first_symbol: self.next_symbol, labels });
    }
}

#[derive(Default)]
struct Window {
    delivered_bits: f64,
    aser_sum: f64,
    frames: usize,
    rx: Vec<Complex<f64>>,
    reference: Vec<Complex<f64>>,
}

/// Majority vote per bit over the repeated copies; a tied bit takes the
/// decision on the averaged copy.
fn combine(copies: &[Complex<f64>], c: &Constellation<f64>) -> usize {
    if copies.len() == 1 {
        return c.decide(copies[0]);
    }
    let bps = c.bits_per_symbol();
    let mut ones = vec![0usize; bps];
    for z in copies {
        for (k, b) in c.label_bits(c.decide(*z)).enumerate() {
            ones[k] += b as usize;
        }
    }
    let avg = copies.iter().sum::<Complex<f64>>() / copies.len() as f64;
    let fallback: Vec<bool> = c.label_bits(c.decide(avg)).collect();
    let bits: Vec<bool> = ones
        .iter()
        .zip(&fallback)
        .map(|(&n, &fb)| match (2 * n).cmp(&copies.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => fb,
        })
        .collect();
    c.label_from_bits(&bits)
}

/// Symbol-instant matched-filter outputs of one throughput window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCapture {
    /// First sample index of the window.
    pub timestamp: u64,
    /// Received frames back to back, `frame_symbols` outputs each.
    pub rx: Vec<Complex<f64>>,
    /// The same instants from the interference-free reference receiver.
    pub reference: Vec<Complex<f64>>,
    pub frame_symbols: usize,
}

/// Runs the link through `scene` against `interference` for `duration_s`
/// seconds, with genie timing and a per-frame single-tap equalizer taken
/// from the frame's preamble.
pub fn run_link_trial(
    link: &LinkConfig,
    interference: &mut dyn SampleSource<f64>,
    scene: &SceneConfig,
    duration_s: f64,
    seed: u64,
) -> Result<LinkTrial> {
    trial(link, interference, scene, duration_s, seed, false).map(|(t, _)| t)
}

/// [`run_link_trial`] that also returns each window's symbol samples.
pub fn run_link_trial_captured(
    link: &LinkConfig,
    interference: &mut dyn SampleSource<f64>,
    scene: &SceneConfig,
    duration_s: f64,
    seed: u64,
) -> Result<(LinkTrial, Vec<WindowCapture>)> {
    trial(link, interference, scene, duration_s, seed, true)
}

fn trial(
    link: &LinkConfig,
    interference: &mut dyn SampleSource<f64>,
    scene: &SceneConfig,
    duration_s: f64,
    seed: u64,
    keep: bool,
) -> Result<(LinkTrial, Vec<WindowCapture>)> {
    link.validate()?;
    scene.validate()?;
    let fs = scene.sample_rate;
    if interference.sample_rate() != fs {
        return Err(DspError::Config(format!(
            "interference runs at {} Hz but the scene at {fs} Hz",
            interference.sample_rate()
        )));
    }
    let sps = samples_per_symbol(fs, link.symbol_rate)? as u64;
    let filter = RootRaisedCosine::new(sps as usize, link.rolloff)?;
    let delay = (filter.cascade_delay() + scene.tx_rx.main_delay()) as u64;
    let preamble = AccessPreamble::<f64>::default();
    let total = (duration_s * fs).round() as u64;
    let window_len = fs.round() as u64;
    let n_windows = total.div_ceil(window_len) as usize;

    let mut tx = Transmitter {
        preamble: preamble.symbols().to_vec(),
        constellation: link.modulation.constellation(),
        link: link.clone(),
        rng: rng::seeded(seed, rng::stream::LINK),
        queue: VecDeque::new(),
        frames: VecDeque::new(),
        next_symbol: 0,
        amplitude: db_to_amplitude(scene.link_power_db),
    };
    let mut shaper = PulseShaper::<f64>::new(&filter);
    let mut rx = Receiver::<f64>::new(scene, seed)?;
    let mut ref_rx = Receiver::<f64>::new(scene, !seed)?;
    let mut mf = MatchedFilter::<f64>::new(&filter);
    let mut mf_ref = MatchedFilter::<f64>::new(&filter);
    let mut windows: Vec<Window> = (0..n_windows).map(|_| Window::default()).collect();
    let frame_len = link.frame_symbols(preamble.len()) as u64;
    let (mut sent, mut delivered) = (0usize, 0usize);

    let mut block = vec![Complex::new(0.0, 0.0); BLOCK];
    let mut ref_block = vec![Complex::new(0.0, 0.0); BLOCK];
    let mut interf = vec![Complex::new(0.0, 0.0); BLOCK];
    let mut produced = 0u64;
    'outer: loop {
        {
            let mut feed = || tx.next();
            for s in block.iter_mut() {
                *s = shaper.next_with(&mut feed);
            }
        }
        ref_block.copy_from_slice(&block);
        interference.fill(&mut interf);
        rx.process(&mut block, &interf);
        ref_rx.process_link_only(&mut ref_block);
        mf.push(&block);
        mf_ref.push(&ref_block);
        produced += BLOCK as u64;

        while let Some(frame) = tx.frames.front() {
            let start_sample = frame.first_symbol * sps;
            if start_sample >= total {
                break 'outer;
            }
            let instant = |j: u64| (frame.first_symbol + j) * sps + delay;
            if instant(frame_len - 1) >= produced {
                break;
            }
            let outputs: Vec<Complex<f64>> = (0..frame_len).map(|j| mf.output_at(instant(j)).expect("pushed")).collect();
            let wi = (start_sample / window_len) as usize;
            let w = &mut windows[wi];
            w.rx.extend_from_slice(&outputs);
            w.reference.extend((0..frame_len).map(|j| mf_ref.output_at(instant(j)).expect("pushed")));

            let pre = &outputs[..preamble.len()];
            w.aser_sum += compute_aser(pre, &preamble)?;
            w.frames += 1;
            let h = least_squares_gain(pre, preamble.symbols());
            let r = link.repetition;
            let ok = frame.labels.iter().enumerate().all(|(i, &label)| {
                let base = preamble.len() + i * r;
                let copies: Vec<Complex<f64>> = outputs[base..base + r].iter().map(|z| z / h).collect();
                combine(&copies, &tx.constellation) == label
            });
            sent += 1;
            if ok {
                delivered += 1;
                // bits are credited to windows in proportion to airtime
                let end_sample = start_sample + frame_len * sps;
                let mut t = start_sample;
                while t < end_sample {
                    let wi = (t / window_len) as usize;
                    let edge = ((wi as u64 + 1) * window_len).min(end_sample);
                    if let Some(win) = windows.get_mut(wi) {
                        win.delivered_bits += link.frame_bits as f64 * (edge - t) as f64 / (frame_len * sps) as f64;
                    }
                    t = edge;
                }
            }
            let next = instant(frame_len);
            tx.frames.pop_front();
            mf.discard_before(next);
            mf_ref.discard_before(next);
        }
    }

    let span = |w: usize| ((w as u64 + 1) * window_len).min(total) - w as u64 * window_len;
    let mut throughput = Vec::with_capacity(n_windows);
    let mut records = Vec::with_capacity(n_windows);
    let mut captures = Vec::new();
    for (i, w) in windows.into_iter().enumerate() {
        let seconds = span(i) as f64 / fs;
        let tput = w.delivered_bits / seconds;
        throughput.push(tput);
        let kld = kld_samples(&w.rx, &w.reference, link.kld).ok();
        records.push(MetricsRecord {
            timestamp: i as u64 * window_len,
            aser: if w.frames == 0 { 0.0 } else { w.aser_sum / w.frames as f64 },
            kld,
            throughput: tput,
            context: MetricsContext {
                scene: scene.label.clone(),
                distance_m: scene.interferer_rx.distance,
                modulations: vec![link.modulation.name().to_string()],
                ..MetricsContext::default()
            },
        });
        if keep {
            captures.push(WindowCapture {
                timestamp: i as u64 * window_len,
                rx: w.rx,
                reference: w.reference,
                frame_symbols: frame_len as usize,
            });
        }
    }
    Ok((LinkTrial { throughput, records, frames_sent: sent, frames_delivered: delivered }, captures))
}
