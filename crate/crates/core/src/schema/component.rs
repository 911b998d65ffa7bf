//! Component definitions and the ordered interface spec built from them.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::SchemaError;

/// The kind tag stored under `"type"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Text,
    Textbox,
    Button,
    Selection,
    Dropdown,
    Slider,
    Table,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Text => "text",
            ComponentKind::Textbox => "textbox",
            ComponentKind::Button => "button",
            ComponentKind::Selection => "selection",
            ComponentKind::Dropdown => "dropdown",
            ComponentKind::Slider => "slider",
            ComponentKind::Table => "table",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "text" => ComponentKind::Text,
            "textbox" => ComponentKind::Textbox,
            "button" => ComponentKind::Button,
            "selection" => ComponentKind::Selection,
            "dropdown" => ComponentKind::Dropdown,
            "slider" => ComponentKind::Slider,
            "table" => ComponentKind::Table,
            _ => return None,
        })
    }

    /// Input-only components never collect an answer.
    pub fn is_display_only(self) -> bool {
        matches!(self, ComponentKind::Text | ComponentKind::Table)
    }
}

/// One validated component of an annotation screen.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentSpec {
    Text,
    Textbox,
    Button { contents: Vec<String> },
    /// Empty `contents` means unlabeled span highlighting.
    Selection { contents: Vec<String> },
    Dropdown { contents: Vec<String> },
    Slider { min: f64, max: f64, step: f64 },
    Table { columns: Vec<String> },
}

impl ComponentSpec {
    pub fn kind(&self) -> ComponentKind {
        match self {
            ComponentSpec::Text => ComponentKind::Text,
            ComponentSpec::Textbox => ComponentKind::Textbox,
            ComponentSpec::Button { .. } => ComponentKind::Button,
            ComponentSpec::Selection { .. } => ComponentKind::Selection,
            ComponentSpec::Dropdown { .. } => ComponentKind::Dropdown,
            ComponentSpec::Slider { .. } => ComponentKind::Slider,
            ComponentSpec::Table { .. } => ComponentKind::Table,
        }
    }

    /// Option or tag labels, empty for kinds without them.
    pub fn contents(&self) -> &[String] {
        match self {
            ComponentSpec::Button { contents }
            | ComponentSpec::Selection { contents }
            | ComponentSpec::Dropdown { contents } => contents,
            _ => &[],
        }
    }

    /// Parses a raw `{"type": .., "properties": {..}}` object.
    ///
    /// `index` is only used to locate errors.
    pub fn from_json(index: usize, raw: &Value) -> Result<Self, SchemaError> {
        let obj = raw.as_object().ok_or_else(|| SchemaError::InvalidProperties {
            index: Some(index),
            reason: "component must be an object".into(),
        })?;
        for key in obj.keys() {
            if key != "type" && key != "properties" {
                return Err(SchemaError::InvalidProperties {
                    index: Some(index),
                    reason: format!("unknown component key `{key}`"),
                });
            }
        }
        let kind_str = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| SchemaError::InvalidProperties {
                index: Some(index),
                reason: "missing string `type`".into(),
            })?;
        let kind = ComponentKind::parse(kind_str).ok_or_else(|| SchemaError::UnknownComponentKind {
            index,
            kind: kind_str.to_string(),
        })?;
        let empty = Map::new();
        let props = match obj.get("properties") {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => {
                return Err(SchemaError::InvalidProperties {
                    index: Some(index),
                    reason: "`properties` must be an object".into(),
                })
            }
        };
        let props = Props { index, map: props };

        let spec = match kind {
            ComponentKind::Text => {
                props.allow(&[])?;
                ComponentSpec::Text
            }
            ComponentKind::Textbox => {
                props.allow(&[])?;
                ComponentSpec::Textbox
            }
            ComponentKind::Button | ComponentKind::Dropdown => {
                props.allow(&["contents"])?;
                let contents = props.strings("contents")?.unwrap_or_default();
                if contents.is_empty() {
                    return Err(props.invalid(format!("{kind_str} requires non-empty `contents`")));
                }
                if kind == ComponentKind::Button {
                    ComponentSpec::Button { contents }
                } else {
                    ComponentSpec::Dropdown { contents }
                }
            }
            ComponentKind::Selection => {
                props.allow(&["contents"])?;
                ComponentSpec::Selection { contents: props.strings("contents")?.unwrap_or_default() }
            }
            ComponentKind::Slider => {
                props.allow(&["min", "max", "step"])?;
                let min = props.number("min")?;
                let max = props.number("max")?;
                let step = props.number("step")?;
                if !(min < max) {
                    return Err(props.invalid("slider requires min < max".into()));
                }
                if !(step > 0.0) {
                    return Err(props.invalid("slider requires step > 0".into()));
                }
                ComponentSpec::Slider { min, max, step }
            }
            ComponentKind::Table => {
                props.allow(&["columns"])?;
                ComponentSpec::Table { columns: props.strings("columns")?.unwrap_or_default() }
            }
        };
        if let Some(dup) = first_duplicate(spec.contents()) {
            return Err(SchemaError::InvalidProperties {
                index: Some(index),
                reason: format!("duplicate label `{dup}` in `contents`"),
            });
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> Value {
        let mut props = Map::new();
        match self {
            ComponentSpec::Text | ComponentSpec::Textbox => {}
            ComponentSpec::Button { contents }
            | ComponentSpec::Selection { contents }
            | ComponentSpec::Dropdown { contents } => {
                props.insert("contents".into(), Value::from(contents.clone()));
            }
            ComponentSpec::Slider { min, max, step } => {
                props.insert("min".into(), Value::from(*min));
                props.insert("max".into(), Value::from(*max));
                props.insert("step".into(), Value::from(*step));
            }
            ComponentSpec::Table { columns } => {
                props.insert("columns".into(), Value::from(columns.clone()));
            }
        }
        let mut obj = Map::new();
        obj.insert("type".into(), Value::from(self.kind().as_str()));
        obj.insert("properties".into(), Value::Object(props));
        Value::Object(obj)
    }
}

fn first_duplicate(items: &[String]) -> Option<&str> {
    let mut seen = std::collections::HashSet::new();
    items.iter().find(|s| !seen.insert(s.as_str())).map(String::as_str)
}

struct Props<'a> {
    index: usize,
    map: &'a Map<String, Value>,
}

impl Props<'_> {
    fn invalid(&self, reason: String) -> SchemaError {
        SchemaError::InvalidProperties { index: Some(self.index), reason }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), SchemaError> {
        match self.map.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(self.invalid(format!("unknown property `{k}`"))),
            None => Ok(()),
        }
    }

    fn strings(&self, key: &str) -> Result<Option<Vec<String>>, SchemaError> {
        let Some(v) = self.map.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.invalid(format!("`{key}` must be a list")))?;
        arr.iter()
            .map(|item| {
                item.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| self.invalid(format!("`{key}` entries must be strings")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn number(&self, key: &str) -> Result<f64, SchemaError> {
        self.map
            .get(key)
            .and_then(Value::as_f64)
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.invalid(format!("slider requires numeric `{key}`")))
    }
}

impl Serialize for ComponentSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComponentSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Value::deserialize(deserializer)?;
        ComponentSpec::from_json(0, &raw).map_err(D::Error::custom)
    }
}

/// The ordered `format` array. Order is render order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSpec {
    components: Vec<ComponentSpec>,
}

impl InterfaceSpec {
    pub fn new(components: Vec<ComponentSpec>) -> Result<Self, SchemaError> {
        if components.is_empty() {
            return Err(SchemaError::InvalidProperties {
                index: None,
                reason: "`format` must contain at least one component".into(),
            });
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, index: usize) -> Option<&ComponentSpec> {
        self.components.get(index)
    }

    /// Parses the `format` array out of a JSON value (either a bare
    /// `{"format": [..]}` object or a full task file with `data`).
    pub fn from_value(doc: &Value) -> Result<Self, SchemaError> {
        let format = doc
            .get("format")
            .ok_or_else(|| SchemaError::MalformedDocument("missing `format` array".into()))?
            .as_array()
            .ok_or_else(|| SchemaError::MalformedDocument("`format` must be an array".into()))?;
        let components = format
            .iter()
            .enumerate()
            .map(|(i, raw)| ComponentSpec::from_json(i, raw))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    pub fn to_value(&self) -> Value {
        Value::Array(self.components.iter().map(ComponentSpec::to_json).collect())
    }
}

/// Parses an interface spec from JSON text.
pub fn parse_interface_spec(document: &str) -> Result<InterfaceSpec, SchemaError> {
    let doc: Value =
        serde_json::from_str(document).map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
    InterfaceSpec::from_value(&doc)
}

impl Serialize for InterfaceSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.components.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InterfaceSpec {
    /// Deserializes the bare array form used inside task files.
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<Value>::deserialize(deserializer)?;
        let components = raw
            .iter()
            .enumerate()
            .map(|(i, v)| ComponentSpec::from_json(i, v))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        InterfaceSpec::new(components).map_err(D::Error::custom)
    }
}
