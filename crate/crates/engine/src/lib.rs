//! Session engine on top of `stormbench-core`: the waveform registry, the
//! orchestrator that owns the transmit stream, the spectrum monitor, and the
//! on-disk run log.

pub mod binding;
pub mod datalog;
pub mod error;
pub mod experiment;
pub mod monitor;
pub mod orchestrator;
pub mod registry;

pub use error::{EngineError, Result};
