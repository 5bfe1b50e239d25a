//! Descriptor-driven waveform registry.
//!
//! Built-in and user waveforms go through the same path: a descriptor is
//! validated, checked against the implementation it binds to, and then
//! becomes visible atomically.

mod descriptor;
mod form;

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stormbench_core::waveform::WaveformKind;

use crate::binding::check_compatible;
use crate::{EngineError, Result};

pub use descriptor::{
    validate_descriptor, validate_value, DescriptorError, ExecutionMode, ParamKind, ParamValue, ParameterDef, Params,
    ValidationReport, Violation, ViolationCode, WaveformDescriptor, FREQUENCY_LIMITS, GAIN_LIMITS_DB, SCHEMA_VERSION,
};
pub use form::{FormSpec, Widget, WidgetKind};

/// Registry ids are the descriptor's `waveform_name`.
pub type RegistryId = String;

/// Shipped descriptors and the implementations they bind to.
pub const BUILTINS: [(&str, &str); 9] = [
    (include_str!("../../waveforms/baseline.json"), "baseline"),
    (include_str!("../../waveforms/baseline_direct.json"), "baseline"),
    (include_str!("../../waveforms/am.json"), "am"),
    (include_str!("../../waveforms/fm.json"), "fm"),
    (include_str!("../../waveforms/hop.json"), "hop"),
    (include_str!("../../waveforms/sweep.json"), "sweep"),
    (include_str!("../../waveforms/dsss.json"), "dsss"),
    (include_str!("../../waveforms/ofdm.json"), "ofdm"),
    (include_str!("../../waveforms/otfs.json"), "otfs"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredWaveform {
    pub id: RegistryId,
    pub descriptor: WaveformDescriptor,
    pub binding: WaveformKind,
    pub builtin: bool,
}

impl From<DescriptorError> for EngineError {
    fn from(e: DescriptorError) -> Self {
        match e {
            DescriptorError::Parse(msg) => EngineError::Parse(msg),
            DescriptorError::Invalid(report) => EngineError::Validation(report),
        }
    }
}

/// Read-mostly store; writers hold the lock for the whole check-and-insert.
#[derive(Debug, Default)]
pub struct Registry {
    entries: RwLock<Vec<Arc<RegisteredWaveform>>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let registry = Self::new();
        for (doc, binding) in BUILTINS {
            let descriptor = validate_descriptor(doc).expect("shipped descriptor is valid");
            registry.insert(descriptor, binding, true).expect("shipped descriptors are compatible and distinct");
        }
        registry
    }

    /// Registers a validated descriptor against a named implementation.
    pub fn register(&self, descriptor: WaveformDescriptor, binding: &str) -> Result<RegistryId> {
        // normalizes and re-checks descriptors built in code
        let descriptor = validate_value(&serde_json::to_value(&descriptor)?)?;
        self.insert(descriptor, binding, false)
    }

    /// Validates `document` and registers it.
    pub fn register_document(&self, document: &str, binding: &str) -> Result<RegistryId> {
        let descriptor = validate_descriptor(document)?;
        self.insert(descriptor, binding, false)
    }

    fn insert(&self, descriptor: WaveformDescriptor, binding: &str, builtin: bool) -> Result<RegistryId> {
        let kind: WaveformKind = binding
            .parse()
            .map_err(|_| EngineError::Compatibility(format!("no implementation named '{binding}'")))?;
        check_compatible(&descriptor, kind).map_err(EngineError::Compatibility)?;
        let mut entries = self.entries.write().expect("registry lock");
        let id = descriptor.waveform_name.clone();
        if entries.iter().any(|e| e.id == id) {
            return Err(EngineError::Duplicate(id));
        }
        entries.push(Arc::new(RegisteredWaveform { id: id.clone(), descriptor, binding: kind, builtin }));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<Arc<RegisteredWaveform>> {
        self.entries
            .read()
            .expect("registry lock")
            .iter()
            .find(|e| e.id == id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownWaveform(id.to_string()))
    }

    /// Registered waveforms in registration order.
    pub fn list(&self) -> Vec<Arc<RegisteredWaveform>> {
        self.entries.read().expect("registry lock").clone()
    }

    pub fn snapshot(&self) -> Vec<RegisteredWaveform> {
        self.list().iter().map(|e| (**e).clone()).collect()
    }

    pub fn validate_params(&self, id: &str, values: &Map<String, Value>) -> Result<Params> {
        self.get(id)?.descriptor.validate_params(values).map_err(EngineError::Validation)
    }

    pub fn form_spec(&self, id: &str) -> Result<FormSpec> {
        Ok(FormSpec::from_descriptor(&self.get(id)?.descriptor))
    }
}
