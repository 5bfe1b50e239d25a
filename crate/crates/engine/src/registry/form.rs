use serde::{Deserialize, Serialize};

use super::{ParamKind, ParamValue, ParameterDef, WaveformDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    IntegerInput,
    NumberInput,
    Dropdown,
}

/// One configuration control, derived from exactly one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    pub name: String,
    pub label: String,
    pub kind: WidgetKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<ParamValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<ParamValue>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub options: Vec<ParamValue>,
    pub units: String,
    pub default: ParamValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSpec {
    pub waveform: String,
    pub widgets: Vec<Widget>,
}

fn label(name: &str) -> String {
    let mut s = name.replace('_', " ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s
}

impl Widget {
    pub fn from_parameter(p: &ParameterDef) -> Self {
        let (kind, min, max, options) = match p.kind {
            ParamKind::Integer => (WidgetKind::IntegerInput, p.range.first().cloned(), p.range.get(1).cloned(), vec![]),
            ParamKind::Float => (WidgetKind::NumberInput, p.range.first().cloned(), p.range.get(1).cloned(), vec![]),
            ParamKind::Enumerated => (WidgetKind::Dropdown, None, None, p.range.clone()),
        };
        Self { name: p.name.clone(), label: label(&p.name), kind, min, max, options, units: p.units.clone(), default: p.default.clone() }
    }

    /// The parameter this widget was derived from.
    pub fn to_parameter(&self) -> ParameterDef {
        let (kind, range) = match self.kind {
            WidgetKind::IntegerInput => (ParamKind::Integer, self.min.iter().chain(&self.max).cloned().collect()),
            WidgetKind::NumberInput => (ParamKind::Float, self.min.iter().chain(&self.max).cloned().collect()),
            WidgetKind::Dropdown => (ParamKind::Enumerated, self.options.clone()),
        };
        ParameterDef { name: self.name.clone(), kind, range, units: self.units.clone(), default: self.default.clone() }
    }
}

impl FormSpec {
    pub fn from_descriptor(d: &WaveformDescriptor) -> Self {
        Self { waveform: d.waveform_name.clone(), widgets: d.parameters.iter().map(Widget::from_parameter).collect() }
    }
}
