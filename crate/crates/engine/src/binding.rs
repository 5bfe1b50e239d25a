//! Maps registry parameters onto the core generators.
//!
//! A descriptor is bound to one implementation ([`WaveformKind`]). Parameter
//! names are shared across implementations: `center_frequency` is an RF
//! frequency that becomes a baseband offset against the session's reference
//! frequency, and `gain` is the output level in dB.

use serde::{Deserialize, Serialize};
use stormbench_core::chain::{NarrowbandChain, NarrowbandChainConfig, RandomSymbols, WidebandChain, WidebandChainConfig};
use stormbench_core::signal::Modulation;
use stormbench_core::waveform::{
    HopPlan, OfdmConfig, OfdmFrames, OtfsFrames, SampleSource, SymbolSource, WaveformConfig, WaveformKind,
};
use stormbench_core::DspError;

use crate::registry::{ExecutionMode, ParamValue, Params, WaveformDescriptor};
use crate::{EngineError, Result};

/// Session-wide inputs to generator construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildContext {
    pub sample_rate: f64,
    /// RF frequency at the centre of the simulated band.
    pub reference_frequency: f64,
    pub seed: u64,
}

impl Default for BuildContext {
    fn default() -> Self {
        Self { sample_rate: 1e6, reference_frequency: 2.45e9, seed: 0 }
    }
}

const COMMON: [&str; 2] = ["center_frequency", "gain"];

pub fn supported_parameters(kind: WaveformKind) -> &'static [&'static str] {
    match kind {
        WaveformKind::Baseline => &["modulation", "symbol_rate", "rolloff"],
        WaveformKind::Am => &["tone_freq", "mod_index"],
        WaveformKind::Fm => &["tone_freq", "freq_deviation"],
        WaveformKind::Hop => &["modulation", "symbol_rate", "n_channels", "channel_spacing", "dwell"],
        WaveformKind::Sweep => &["sweep_width", "period"],
        WaveformKind::Dsss => &["modulation", "chip_rate", "chips_per_symbol", "pn_seed"],
        WaveformKind::Ofdm => &["modulation", "n_subcarriers", "cp_length"],
        WaveformKind::Otfs => &["modulation", "m_delay_bins", "n_doppler_bins", "cp_length"],
    }
}

/// Implementations that can run as symbol or frame logic on a shared chain.
pub fn composable(kind: WaveformKind) -> bool {
    matches!(kind, WaveformKind::Baseline | WaveformKind::Ofdm | WaveformKind::Otfs)
}

/// Checks that `descriptor` can run on `kind`; the error names the mismatch.
pub fn check_compatible(descriptor: &WaveformDescriptor, kind: WaveformKind) -> std::result::Result<(), String> {
    if descriptor.category != kind.category() {
        return Err(format!(
            "{} is declared {} but implementation {kind} runs on the {} chain",
            descriptor.waveform_name,
            descriptor.category,
            kind.category()
        ));
    }
    if descriptor.execution_mode == ExecutionMode::ComposedBaseChain && !composable(kind) {
        return Err(format!("implementation {kind} has no symbol logic to compose with a base chain"));
    }
    let known = supported_parameters(kind);
    if let Some(p) = descriptor.parameters.iter().find(|p| !COMMON.contains(&p.name.as_str()) && !known.contains(&p.name.as_str())) {
        return Err(format!("implementation {kind} has no parameter '{}'", p.name));
    }
    Ok(())
}

struct Lookup<'a>(&'a Params);

impl Lookup<'_> {
    fn f64(&self, name: &str) -> Option<f64> {
        self.0.get(name).and_then(ParamValue::as_f64)
    }

    fn usize(&self, name: &str) -> Result<Option<usize>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_i64()
                .and_then(|i| usize::try_from(i).ok())
                .map(Some)
                .ok_or_else(|| config(format!("{name} must be a non-negative integer, got {v}"))),
        }
    }

    fn modulation(&self) -> Result<Option<Modulation>> {
        match self.0.get("modulation") {
            None => Ok(None),
            Some(v) => {
                let name = v.as_str().ok_or_else(|| config(format!("modulation must be a name, got {v}")))?;
                Ok(Some(name.parse()?))
            }
        }
    }
}

fn config(msg: String) -> EngineError {
    EngineError::Dsp(DspError::Config(msg))
}

/// Generator configuration for `kind` with `params` applied over the
/// implementation defaults.
pub fn waveform_config(kind: WaveformKind, params: &Params, ctx: &BuildContext) -> Result<WaveformConfig> {
    let p = Lookup(params);
    let fs = ctx.sample_rate;
    let offset = match p.f64("center_frequency") {
        None => 0.0,
        Some(cf) => {
            let offset = cf - ctx.reference_frequency;
            if offset.abs() >= fs / 2.0 {
                return Err(config(format!(
                    "center frequency {cf} Hz lies outside the simulated band {} ± {} Hz",
                    ctx.reference_frequency,
                    fs / 2.0
                )));
            }
            offset
        }
    };
    let gain = p.f64("gain");
    let mut cfg = WaveformConfig::default_for(kind, fs);
    match &mut cfg {
        WaveformConfig::Baseline(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.modulation = p.modulation()?.unwrap_or(c.modulation);
            c.symbol_rate = p.f64("symbol_rate").unwrap_or(c.symbol_rate);
            c.rolloff = p.f64("rolloff").unwrap_or(c.rolloff);
            c.seed = ctx.seed;
        }
        WaveformConfig::Am(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.tone_freq = p.f64("tone_freq").unwrap_or(c.tone_freq);
            c.mod_index = p.f64("mod_index").unwrap_or(c.mod_index);
        }
        WaveformConfig::Fm(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.tone_freq = p.f64("tone_freq").unwrap_or(c.tone_freq);
            c.freq_deviation = p.f64("freq_deviation").unwrap_or(c.freq_deviation);
        }
        WaveformConfig::Hop(c) => {
            let inner = &mut c.inner;
            inner.carrier_offset = offset;
            inner.gain_db = gain.unwrap_or(inner.gain_db);
            inner.modulation = p.modulation()?.unwrap_or(inner.modulation);
            inner.symbol_rate = p.f64("symbol_rate").unwrap_or(inner.symbol_rate);
            inner.seed = ctx.seed;
            let n = p.usize("n_channels")?.unwrap_or(c.plan.channel_offsets.len());
            let default_spacing = c.plan.channel_offsets.get(1).map_or(fs / 10.0, |f| f - c.plan.channel_offsets[0]);
            let spacing = p.f64("channel_spacing").unwrap_or(default_spacing);
            let dwell = p.f64("dwell").unwrap_or(c.plan.dwell);
            c.plan = HopPlan::evenly_spaced(n, spacing, dwell, ctx.seed);
        }
        WaveformConfig::Sweep(c) => {
            c.gain_db = gain.unwrap_or(c.gain_db);
            let width = p.f64("sweep_width").unwrap_or(c.f_end - c.f_start);
            c.f_start = offset - width / 2.0;
            c.f_end = offset + width / 2.0;
            c.period = p.f64("period").unwrap_or(c.period);
        }
        WaveformConfig::Dsss(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.modulation = p.modulation()?.unwrap_or(c.modulation);
            c.chip_rate = p.f64("chip_rate").unwrap_or(c.chip_rate);
            c.spread.chips_per_symbol = p.usize("chips_per_symbol")?.unwrap_or(c.spread.chips_per_symbol);
            c.spread.pn_seed = p.usize("pn_seed")?.map_or(c.spread.pn_seed, |s| s as u64);
            c.seed = ctx.seed;
        }
        WaveformConfig::Ofdm(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.modulation = p.modulation()?.unwrap_or(c.modulation);
            c.n_subcarriers = p.usize("n_subcarriers")?.unwrap_or(c.n_subcarriers);
            c.cp_length = p.usize("cp_length")?.unwrap_or(c.cp_length);
            c.seed = ctx.seed;
        }
        WaveformConfig::Otfs(c) => {
            c.carrier_offset = offset;
            c.gain_db = gain.unwrap_or(c.gain_db);
            c.modulation = p.modulation()?.unwrap_or(c.modulation);
            c.m_delay_bins = p.usize("m_delay_bins")?.unwrap_or(c.m_delay_bins);
            c.n_doppler_bins = p.usize("n_doppler_bins")?.unwrap_or(c.n_doppler_bins);
            c.cp_length = p.usize("cp_length")?.unwrap_or(c.cp_length);
            c.seed = ctx.seed;
        }
    }
    Ok(cfg)
}

/// Builds a running generator. Direct mode instantiates the implementation's
/// own generator; composed mode feeds its symbol or frame logic through the
/// shared narrowband or wideband chain.
pub fn build_source(
    kind: WaveformKind,
    mode: ExecutionMode,
    params: &Params,
    ctx: &BuildContext,
) -> Result<Box<dyn SampleSource<f64>>> {
    let cfg = waveform_config(kind, params, ctx)?;
    if mode == ExecutionMode::DirectGraph {
        return Ok(cfg.build::<f64>()?);
    }
    let source: Box<dyn SampleSource<f64>> = match cfg {
        WaveformConfig::Baseline(c) => {
            let chain = NarrowbandChainConfig {
                sample_rate: c.sample_rate,
                symbol_rate: c.symbol_rate,
                rolloff: c.rolloff,
                gain_db: c.gain_db,
                carrier_offset: c.carrier_offset,
            };
            let logic = RandomSymbols::new(c.modulation.constellation(), SymbolSource::seeded(c.seed));
            Box::new(NarrowbandChain::new(&chain, Box::new(logic))?)
        }
        WaveformConfig::Ofdm(c) => {
            let frames = OfdmFrames::new(&OfdmConfig::new(c.n_subcarriers, c.cp_length)?, c.modulation, SymbolSource::seeded(c.seed))?;
            let chain = WidebandChainConfig { sample_rate: c.sample_rate, gain_db: c.gain_db, carrier_offset: c.carrier_offset };
            Box::new(WidebandChain::new(&chain, Box::new(frames))?)
        }
        WaveformConfig::Otfs(c) => {
            let frames = OtfsFrames::new(&c.grid(), c.modulation, SymbolSource::seeded(c.seed))?;
            let chain = WidebandChainConfig { sample_rate: c.sample_rate, gain_db: c.gain_db, carrier_offset: c.carrier_offset };
            Box::new(WidebandChain::new(&chain, Box::new(frames))?)
        }
        other => {
            return Err(EngineError::Compatibility(format!("implementation {} cannot run composed", other.kind())));
        }
    };
    Ok(source)
}
