use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stormbench_core::waveform::Category;

pub const SCHEMA_VERSION: u64 = 1;

/// Tunable range of the platform's radios, in Hz.
pub const FREQUENCY_LIMITS: (f64, f64) = (70e6, 6e9);
/// Interference gain range, in dB.
pub const GAIN_LIMITS_DB: (f64, f64) = (5.0, 25.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    DirectGraph,
    ComposedBaseChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    Float,
    Enumerated,
}

/// A parameter value as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Integer(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Integer(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_i64().map(ParamValue::Integer).or_else(|| n.as_f64().map(ParamValue::Float)),
            Value::String(s) => Some(ParamValue::Text(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Integer(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// Normalized parameter values keyed by name.
pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDef {
    pub name: String,
    pub kind: ParamKind,
    /// `[min, max]` for numeric kinds, the option list for enumerated ones.
    pub range: Vec<ParamValue>,
    pub units: String,
    pub default: ParamValue,
}

impl ParameterDef {
    /// Inclusive numeric bounds; `None` for enumerated parameters.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match (self.kind, self.range.as_slice()) {
            (ParamKind::Integer | ParamKind::Float, [lo, hi]) => Some((lo.as_f64()?, hi.as_f64()?)),
            _ => None,
        }
    }

    /// Checks one supplied value, returning its normalized form.
    pub fn check(&self, value: &Value) -> std::result::Result<ParamValue, Violation> {
        let path = self.name.clone();
        let bad_type = |want: &str| Violation::new(ViolationCode::BadType, &path, format!("expected {want}, got {value}"));
        let v = match self.kind {
            ParamKind::Integer => ParamValue::Integer(value.as_i64().ok_or_else(|| bad_type("an integer"))?),
            ParamKind::Float => ParamValue::Float(value.as_f64().ok_or_else(|| bad_type("a number"))?),
            ParamKind::Enumerated => {
                let v = ParamValue::from_json(value).ok_or_else(|| bad_type("a string or number"))?;
                if !self.range.contains(&v) {
                    return Err(Violation::new(
                        ViolationCode::RangeViolation,
                        &path,
                        format!("{v} is not one of {}", list(&self.range)),
                    ));
                }
                return Ok(v);
            }
        };
        let (lo, hi) = self.bounds().expect("numeric parameter of a validated descriptor");
        let x = v.as_f64().expect("numeric");
        if !(lo..=hi).contains(&x) {
            return Err(Violation::new(ViolationCode::RangeViolation, &path, format!("{x} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }
}

fn list(values: &[ParamValue]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", items.join(", "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformDescriptor {
    pub schema_version: u64,
    pub waveform_name: String,
    pub category: Category,
    pub execution_mode: ExecutionMode,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub parameters: Vec<ParameterDef>,
}

impl WaveformDescriptor {
    pub fn parameter(&self, name: &str) -> Option<&ParameterDef> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn defaults(&self) -> Params {
        self.parameters.iter().map(|p| (p.name.clone(), p.default.clone())).collect()
    }

    /// Type- and range-checks `values`, filling omitted parameters from
    /// their defaults. Every offending entry is reported.
    pub fn validate_params(&self, values: &Map<String, Value>) -> std::result::Result<Params, ValidationReport> {
        let mut report = ValidationReport::default();
        let mut out = self.defaults();
        for (name, value) in values {
            match self.parameter(name) {
                None => report.push(ViolationCode::UnknownParameter, name, format!("'{name}' is not a parameter of {}", self.waveform_name)),
                Some(def) => match def.check(value) {
                    Ok(v) => {
                        out.insert(name.clone(), v);
                    }
                    Err(v) => report.violations.push(v),
                },
            }
        }
        report.into_result(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    MissingField,
    BadType,
    RangeViolation,
    BadCategory,
    DuplicateName,
    DefaultOutOfRange,
    UnknownParameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Location of the offending value, e.g. `parameters[2].default`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(code: ViolationCode, path: &str, message: impl Into<String>) -> Self {
        Self { code, path: path.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn push(&mut self, code: ViolationCode, path: &str, message: impl Into<String>) {
        self.violations.push(Violation::new(code, path, message));
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn into_result<T>(self, ok: T) -> std::result::Result<T, ValidationReport> {
        if self.is_empty() {
            Ok(ok)
        } else {
            Err(self)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DescriptorError {
    #[error("descriptor is not valid JSON: {0}")]
    Parse(String),
    #[error("descriptor has {} violation(s)", .0.violations.len())]
    Invalid(ValidationReport),
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses and checks a descriptor document, reporting every violation.
pub fn validate_descriptor(document: &str) -> std::result::Result<WaveformDescriptor, DescriptorError> {
    let value: Value = serde_json::from_str(document).map_err(|e| DescriptorError::Parse(e.to_string()))?;
    validate_value(&value)
}

pub fn validate_value(value: &Value) -> std::result::Result<WaveformDescriptor, DescriptorError> {
    let mut report = ValidationReport::default();
    let Some(obj) = value.as_object() else {
        report.push(ViolationCode::BadType, "", "descriptor must be a JSON object");
        return Err(DescriptorError::Invalid(report));
    };
    let field = |report: &mut ValidationReport, key: &str| {
        let v = obj.get(key);
        if v.is_none() {
            report.push(ViolationCode::MissingField, key, format!("required field '{key}' is missing"));
        }
        v
    };

    match field(&mut report, "schema_version") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(Value::Number(n)) if n.as_u64().is_some() => {
            report.push(ViolationCode::RangeViolation, "schema_version", format!("unsupported schema version {n}"))
        }
        Some(v) => report.push(ViolationCode::BadType, "schema_version", format!("expected an integer, got {v}")),
        None => {}
    }
    match field(&mut report, "waveform_name") {
        Some(Value::String(s)) if is_identifier(s) => {}
        Some(v) => report.push(ViolationCode::BadType, "waveform_name", format!("expected an identifier, got {v}")),
        None => {}
    }
    match field(&mut report, "category") {
        Some(Value::String(s)) if s == "narrowband" || s == "wideband" => {}
        Some(Value::String(s)) => {
            report.push(ViolationCode::BadCategory, "category", format!("'{s}' is neither narrowband nor wideband"))
        }
        Some(v) => report.push(ViolationCode::BadType, "category", format!("expected a string, got {v}")),
        None => {}
    }
    match field(&mut report, "execution_mode") {
        Some(Value::String(s)) if s == "direct_graph" || s == "composed_base_chain" => {}
        Some(Value::String(s)) => report.push(
            ViolationCode::RangeViolation,
            "execution_mode",
            format!("'{s}' is neither direct_graph nor composed_base_chain"),
        ),
        Some(v) => report.push(ViolationCode::BadType, "execution_mode", format!("expected a string, got {v}")),
        None => {}
    }
    if let Some(v) = obj.get("description") {
        if !v.is_string() {
            report.push(ViolationCode::BadType, "description", format!("expected a string, got {v}"));
        }
    }
    match field(&mut report, "parameters") {
        Some(Value::Array(params)) => {
            let mut seen = HashSet::new();
            for (i, p) in params.iter().enumerate() {
                check_parameter(&mut report, &format!("parameters[{i}]"), p, &mut seen);
            }
        }
        Some(v) => report.push(ViolationCode::BadType, "parameters", format!("expected an array, got {v}")),
        None => {}
    }

    if !report.is_empty() {
        return Err(DescriptorError::Invalid(report));
    }
    let mut descriptor: WaveformDescriptor = serde_json::from_value(value.clone()).map_err(|e| {
        let mut report = ValidationReport::default();
        report.push(ViolationCode::BadType, "", e.to_string());
        DescriptorError::Invalid(report)
    })?;
    for p in descriptor.parameters.iter_mut().filter(|p| p.kind == ParamKind::Float) {
        for v in p.range.iter_mut().chain(std::iter::once(&mut p.default)) {
            if let ParamValue::Integer(i) = *v {
                *v = ParamValue::Float(i as f64);
            }
        }
    }
    Ok(descriptor)
}

fn check_parameter(report: &mut ValidationReport, path: &str, p: &Value, seen: &mut HashSet<String>) {
    let Some(obj) = p.as_object() else {
        report.push(ViolationCode::BadType, path, "parameter must be a JSON object");
        return;
    };
    let at = |key: &str| format!("{path}.{key}");
    let mut missing = false;
    for key in ["name", "kind", "range", "units", "default"] {
        if !obj.contains_key(key) {
            report.push(ViolationCode::MissingField, &at(key), format!("required field '{key}' is missing"));
            missing = true;
        }
    }

    let name = match obj.get("name") {
        Some(Value::String(s)) if is_identifier(s) => {
            if !seen.insert(s.clone()) {
                report.push(ViolationCode::DuplicateName, &at("name"), format!("parameter '{s}' is declared twice"));
            }
            Some(s.as_str())
        }
        Some(v) => {
            report.push(ViolationCode::BadType, &at("name"), format!("expected an identifier, got {v}"));
            None
        }
        None => None,
    };
    let kind = match obj.get("kind") {
        Some(Value::String(s)) => match s.as_str() {
            "integer" => Some(ParamKind::Integer),
            "float" => Some(ParamKind::Float),
            "enumerated" => Some(ParamKind::Enumerated),
            _ => {
                report.push(ViolationCode::BadType, &at("kind"), format!("unknown parameter kind '{s}'"));
                None
            }
        },
        Some(v) => {
            report.push(ViolationCode::BadType, &at("kind"), format!("expected a string, got {v}"));
            None
        }
        None => None,
    };
    if let Some(v) = obj.get("units") {
        if !v.is_string() {
            report.push(ViolationCode::BadType, &at("units"), format!("expected a string, got {v}"));
        }
    }
    if missing {
        return;
    }
    let Some(kind) = kind else { return };
    let range = &obj["range"];
    let default = &obj["default"];

    let Some(items) = range.as_array() else {
        report.push(ViolationCode::BadType, &at("range"), format!("expected an array, got {range}"));
        return;
    };
    let def = match kind {
        ParamKind::Integer | ParamKind::Float => {
            let numeric = |v: &Value| if kind == ParamKind::Integer { v.is_i64() } else { v.is_number() };
            if items.len() != 2 || !items.iter().all(numeric) {
                report.push(ViolationCode::BadType, &at("range"), format!("expected [min, max] of {kind:?} values"));
                return;
            }
            let (lo, hi) = (items[0].as_f64().unwrap(), items[1].as_f64().unwrap());
            if lo > hi {
                report.push(ViolationCode::RangeViolation, &at("range"), format!("min {lo} exceeds max {hi}"));
                return;
            }
            if let Some((plo, phi, what)) = platform_limits(name) {
                if lo < plo || hi > phi {
                    report.push(
                        ViolationCode::RangeViolation,
                        &at("range"),
                        format!("[{lo}, {hi}] exceeds the platform's {what} limits [{plo}, {phi}]"),
                    );
                    return;
                }
            }
            if !numeric(default) {
                report.push(ViolationCode::BadType, &at("default"), format!("expected a {kind:?} value, got {default}"));
                return;
            }
            let d = default.as_f64().unwrap();
            if !(lo..=hi).contains(&d) {
                report.push(ViolationCode::DefaultOutOfRange, &at("default"), format!("{d} outside [{lo}, {hi}]"));
            }
            return;
        }
        ParamKind::Enumerated => {
            let Some(options) = items.iter().map(ParamValue::from_json).collect::<Option<Vec<_>>>() else {
                report.push(ViolationCode::BadType, &at("range"), "options must be strings or numbers");
                return;
            };
            if options.is_empty() {
                report.push(ViolationCode::RangeViolation, &at("range"), "option list is empty");
                return;
            }
            options
        }
    };
    match ParamValue::from_json(default) {
        Some(d) if def.contains(&d) => {}
        Some(d) => report.push(ViolationCode::DefaultOutOfRange, &at("default"), format!("{d} is not one of {}", list(&def))),
        None => report.push(ViolationCode::BadType, &at("default"), format!("expected a string or number, got {default}")),
    }
}

fn platform_limits(name: Option<&str>) -> Option<(f64, f64, &'static str)> {
    match name? {
        "center_frequency" => Some((FREQUENCY_LIMITS.0, FREQUENCY_LIMITS.1, "frequency")),
        "gain" => Some((GAIN_LIMITS_DB.0, GAIN_LIMITS_DB.1, "gain")),
        _ => None,
    }
}
