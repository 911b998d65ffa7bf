//! Task documents: the parallel `source` / `question` / `result` / `done`
//! arrays that carry data in and annotations out.

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{ComponentSpec, InterfaceSpec, SchemaError};

/// One instance payload: plain text, or a read-only table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Text(String),
    Table { columns: Vec<String>, rows: Vec<Vec<String>> },
}

impl Payload {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Payload::Text(s) => Some(s),
            Payload::Table { .. } => None,
        }
    }

    /// Length in characters of the highlightable text; tables have none.
    pub fn char_len(&self) -> usize {
        self.as_text().map_or(0, |s| s.chars().count())
    }
}

/// A half-open character range `[start, end)` into the source text,
/// optionally carrying a tag label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: Option<String>,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end, label: None }
    }

    pub fn labeled(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self { start, end, label: Some(label.into()) }
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let len = if self.label.is_some() { 3 } else { 2 };
        let mut seq = serializer.serialize_seq(Some(len))?;
        seq.serialize_element(&self.start)?;
        seq.serialize_element(&self.end)?;
        if let Some(label) = &self.label {
            seq.serialize_element(label)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<Value>::deserialize(deserializer)?;
        let offset = |v: &Value| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| D::Error::custom("span offsets must be non-negative integers"))
        };
        match raw.as_slice() {
            [s, e] => Ok(Span::new(offset(s)?, offset(e)?)),
            [s, e, Value::String(l)] => Ok(Span::labeled(offset(s)?, offset(e)?, l.clone())),
            _ => Err(D::Error::custom("span must be [start, end] or [start, end, label]")),
        }
    }
}

/// An annotation answer for one component of one instance.
///
/// JSON forms: `null` (display-only component), a string, an integer
/// option index, a float score, or a list of spans.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ResultValue {
    #[default]
    Empty,
    Text(String),
    Choice(usize),
    Spans(Vec<Span>),
    Score(f64),
}

impl Serialize for ResultValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ResultValue::Empty => serializer.serialize_unit(),
            ResultValue::Text(s) => serializer.serialize_str(s),
            ResultValue::Choice(i) => serializer.serialize_u64(*i as u64),
            ResultValue::Spans(spans) => spans.serialize(serializer),
            ResultValue::Score(x) => serializer.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for ResultValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Value::deserialize(deserializer)?;
        ResultValue::from_value(raw).map_err(D::Error::custom)
    }
}

impl ResultValue {
    pub fn from_value(raw: Value) -> Result<Self, String> {
        match raw {
            Value::Null => Ok(ResultValue::Empty),
            Value::String(s) => Ok(ResultValue::Text(s)),
            Value::Number(n) => match n.as_u64() {
                Some(i) => Ok(ResultValue::Choice(i as usize)),
                None => n.as_f64().map(ResultValue::Score).ok_or_else(|| "invalid number".to_string()),
            },
            Value::Array(_) => serde_json::from_value::<Vec<Span>>(raw)
                .map(ResultValue::Spans)
                .map_err(|e| e.to_string()),
            Value::Bool(_) | Value::Object(_) => Err("unsupported result shape".to_string()),
        }
    }

    /// Interprets a raw answer against the component that collected it,
    /// resolving the shapes JSON cannot tell apart (an integer slider
    /// score, an option label given instead of an index) and checking
    /// every per-kind invariant.
    pub fn conform(self, component: &ComponentSpec, source: &Payload) -> Result<ResultValue, String> {
        use ResultValue as R;
        match (component, self) {
            (ComponentSpec::Text | ComponentSpec::Table { .. }, R::Empty) => Ok(R::Empty),
            (ComponentSpec::Text | ComponentSpec::Table { .. }, _) => {
                Err("display-only component takes no result".into())
            }
            (ComponentSpec::Textbox, R::Text(s)) => Ok(R::Text(s)),
            (ComponentSpec::Button { contents }, v) => resolve_choice(contents, v),
            (ComponentSpec::Dropdown { contents }, R::Spans(spans)) => {
                check_spans(&spans, contents, source.char_len()).map(|_| R::Spans(spans))
            }
            (ComponentSpec::Dropdown { contents }, v) => resolve_choice(contents, v),
            (ComponentSpec::Selection { contents }, R::Spans(spans)) => {
                check_spans(&spans, contents, source.char_len()).map(|_| R::Spans(spans))
            }
            (ComponentSpec::Slider { min, max, .. }, v) => {
                let x = match v {
                    R::Score(x) => x,
                    R::Choice(i) => i as f64,
                    other => return Err(format!("slider expects a number, got {other:?}")),
                };
                if x.is_finite() && *min <= x && x <= *max {
                    Ok(R::Score(x))
                } else {
                    Err(format!("score {x} outside [{min}, {max}]"))
                }
            }
            (c, v) => Err(format!("{} cannot hold {v:?}", c.kind().as_str())),
        }
    }
}

fn resolve_choice(contents: &[String], v: ResultValue) -> Result<ResultValue, String> {
    match v {
        ResultValue::Choice(i) if i < contents.len() => Ok(ResultValue::Choice(i)),
        ResultValue::Choice(i) => Err(format!("choice {i} out of range 0..{}", contents.len())),
        ResultValue::Text(label) => contents
            .iter()
            .position(|c| *c == label)
            .map(ResultValue::Choice)
            .ok_or_else(|| format!("`{label}` is not an option")),
        other => Err(format!("expected an option, got {other:?}")),
    }
}

fn check_spans(spans: &[Span], contents: &[String], text_len: usize) -> Result<(), String> {
    for span in spans {
        if span.start >= span.end {
            return Err(format!("span ({}, {}) needs start < end", span.start, span.end));
        }
        if span.end > text_len {
            return Err(format!("span ({}, {}) exceeds text length {text_len}", span.start, span.end));
        }
        match (&span.label, contents.is_empty()) {
            (None, true) => {}
            (Some(l), false) if contents.contains(l) => {}
            (Some(l), false) => return Err(format!("label `{l}` is not in contents")),
            (Some(_), true) => return Err("unlabeled selection takes plain spans".into()),
            (None, false) => return Err("labeled selection requires a label per span".into()),
        }
    }
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[1].start < w[0].end) {
        return Err(format!(
            "spans ({}, {}) and ({}, {}) overlap",
            w[0].start, w[0].end, w[1].start, w[1].end
        ));
    }
    Ok(())
}

/// The initial value a fresh document holds for `component`.
pub fn empty_result_for(component: &ComponentSpec) -> ResultValue {
    match component {
        ComponentSpec::Text | ComponentSpec::Table { .. } => ResultValue::Empty,
        ComponentSpec::Textbox => ResultValue::Text(String::new()),
        ComponentSpec::Button { .. } => ResultValue::Choice(0),
        ComponentSpec::Selection { .. } | ComponentSpec::Dropdown { .. } => ResultValue::Spans(Vec::new()),
        ComponentSpec::Slider { min, .. } => ResultValue::Score(*min),
    }
}

/// Parallel per-instance arrays. All four have one entry per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDocument {
    pub source: Vec<Payload>,
    pub question: Vec<Vec<String>>,
    #[serde(with = "cells")]
    pub result: Vec<Vec<ResultValue>>,
    pub done: Vec<u8>,
}

/// `result[i][j]` is wrapped as `{"result": value}` on the wire.
mod cells {
    use super::ResultValue;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Cell<T> {
        #[serde(default)]
        result: T,
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<ResultValue>], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Vec<Cell<&ResultValue>>> =
            rows.iter().map(|r| r.iter().map(|v| Cell { result: v }).collect()).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<ResultValue>>, D::Error> {
        let wrapped = Vec::<Vec<Cell<ResultValue>>>::deserialize(d)?;
        Ok(wrapped.into_iter().map(|r| r.into_iter().map(|c| c.result).collect()).collect())
    }
}

impl TaskDocument {
    /// A document whose every result is `empty_result_for` its component.
    pub fn fresh(spec: &InterfaceSpec, source: Vec<Payload>, question: Vec<Vec<String>>) -> Self {
        let n = source.len();
        let row: Vec<ResultValue> = spec.components().iter().map(empty_result_for).collect();
        Self { source, question, result: vec![row; n], done: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn done_count(&self) -> usize {
        self.done.iter().filter(|&&d| d == 1).count()
    }
}

/// What rule a document broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// A top-level array disagrees with `len(source)`.
    LengthMismatch { field: String, expected: usize, found: usize },
    /// A per-instance list disagrees with the component count.
    ArityMismatch { field: String, expected: usize, found: usize },
    InvalidResult { reason: String },
    InvalidDoneFlag { value: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    #[serde(flatten)]
    pub rule: Rule,
}

/// Checks `doc` against `spec`; an empty list means the document is valid.
pub fn validate_task_document(doc: &TaskDocument, spec: &InterfaceSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.source.len();
    let m = spec.len();
    for (field, found) in [("question", doc.question.len()), ("result", doc.result.len()), ("done", doc.done.len())] {
        if found != n {
            out.push(Violation {
                instance: None,
                component: None,
                rule: Rule::LengthMismatch { field: field.into(), expected: n, found },
            });
        }
    }
    let common = n.min(doc.question.len()).min(doc.result.len()).min(doc.done.len());
    for i in 0..common {
        if doc.question[i].len() != m {
            out.push(Violation {
                instance: Some(i),
                component: None,
                rule: Rule::ArityMismatch { field: "question".into(), expected: m, found: doc.question[i].len() },
            });
        }
        if doc.result[i].len() != m {
            out.push(Violation {
                instance: Some(i),
                component: None,
                rule: Rule::ArityMismatch { field: "result".into(), expected: m, found: doc.result[i].len() },
            });
        } else {
            for (j, (value, component)) in doc.result[i].iter().zip(spec.components()).enumerate() {
                if let Err(reason) = value.clone().conform(component, &doc.source[i]) {
                    out.push(Violation { instance: Some(i), component: Some(j), rule: Rule::InvalidResult { reason } });
                }
            }
        }
        if doc.done[i] > 1 {
            out.push(Violation { instance: Some(i), component: None, rule: Rule::InvalidDoneFlag { value: doc.done[i] } });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("instance {index} out of range for {len} instances")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected {expected} results, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("component {component}: {reason}")]
    InvalidResult { component: usize, reason: String },
}

/// Installs `results` as the answer for `instance` and marks it done.
/// Every other instance, and all sources and questions, are untouched.
pub fn merge_annotation(
    doc: &TaskDocument,
    spec: &InterfaceSpec,
    instance: usize,
    results: Vec<ResultValue>,
) -> Result<TaskDocument, MergeError> {
    let conformed = conform_results(spec, doc.source.get(instance), doc.len(), instance, results)?;
    let mut next = doc.clone();
    next.result[instance] = conformed;
    next.done[instance] = 1;
    Ok(next)
}

/// Validates a submission without touching any document.
pub(crate) fn conform_results(
    spec: &InterfaceSpec,
    source: Option<&Payload>,
    len: usize,
    instance: usize,
    results: Vec<ResultValue>,
) -> Result<Vec<ResultValue>, MergeError> {
    let source = source.ok_or(MergeError::IndexOutOfRange { index: instance, len })?;
    if results.len() != spec.len() {
        return Err(MergeError::ArityMismatch { expected: spec.len(), found: results.len() });
    }
    results
        .into_iter()
        .zip(spec.components())
        .enumerate()
        .map(|(j, (v, c))| v.conform(c, source).map_err(|reason| MergeError::InvalidResult { component: j, reason }))
        .collect()
}

/// An interchange file: `{"data": TaskDocument, "format": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub data: TaskDocument,
    pub format: InterfaceSpec,
}

/// Parses a task file, reporting interface problems with their specific
/// error kinds rather than as generic syntax errors.
pub fn parse_task_file(text: &str) -> Result<TaskFile, SchemaError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
    TaskFile::from_value(&raw)
}

impl TaskFile {
    pub fn from_value(raw: &Value) -> Result<Self, SchemaError> {
        let format = InterfaceSpec::from_value(raw)?;
        let data = raw.get("data").ok_or_else(|| SchemaError::MalformedDocument("missing `data` object".into()))?;
        let data = TaskDocument::deserialize(data).map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
        Ok(Self { data, format })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_interface_spec;

    fn two_field_spec() -> InterfaceSpec {
        parse_interface_spec(
            r#"{"format":[{"type":"selection","properties":{"contents":["NP","VP"]}},{"type":"button","properties":{"contents":["yes","no"]}}]}"#,
        )
        .unwrap()
    }

    fn doc(spec: &InterfaceSpec) -> TaskDocument {
        TaskDocument::fresh(
            spec,
            vec![Payload::Text("the cat sat".into()), Payload::Text("a dog".into())],
            vec![vec!["q1".into(), "q2".into()]; 2],
        )
    }

    #[test]
    fn empty_results_per_kind() {
        assert_eq!(empty_result_for(&ComponentSpec::Textbox), ResultValue::Text(String::new()));
        assert_eq!(empty_result_for(&ComponentSpec::Button { contents: vec!["a".into()] }), ResultValue::Choice(0));
        assert_eq!(empty_result_for(&ComponentSpec::Slider { min: -3.0, max: 3.0, step: 1.0 }), ResultValue::Score(-3.0));
        assert_eq!(empty_result_for(&ComponentSpec::Selection { contents: vec![] }), ResultValue::Spans(vec![]));
        assert_eq!(empty_result_for(&ComponentSpec::Dropdown { contents: vec!["x".into()] }), ResultValue::Spans(vec![]));
        assert_eq!(empty_result_for(&ComponentSpec::Text), ResultValue::Empty);
    }

    #[test]
    fn length_mismatch_is_one_violation() {
        let spec = two_field_spec();
        let mut d = doc(&spec);
        d.done.push(0);
        let v = validate_task_document(&d, &spec);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0].rule, Rule::LengthMismatch { field, expected: 2, found: 3 } if field == "done"));
    }

    #[test]
    fn arity_mismatch_names_instance() {
        let spec = two_field_spec();
        let mut d = doc(&spec);
        d.result[1].pop();
        let v = validate_task_document(&d, &spec);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].instance, Some(1));
        assert!(matches!(v[0].rule, Rule::ArityMismatch { .. }));
    }

    #[test]
    fn merge_marks_done_and_last_write_wins() {
        let spec = two_field_spec();
        let d = doc(&spec);
        let first = vec![ResultValue::Spans(vec![Span::labeled(0, 7, "NP")]), ResultValue::Choice(1)];
        let d1 = merge_annotation(&d, &spec, 0, first).unwrap();
        assert_eq!(d1.done, vec![1, 0]);
        let second = vec![ResultValue::Spans(vec![]), ResultValue::Text("yes".into())];
        let d2 = merge_annotation(&d1, &spec, 0, second).unwrap();
        assert_eq!(d2.done, vec![1, 0]);
        assert_eq!(d2.result[0], vec![ResultValue::Spans(vec![]), ResultValue::Choice(0)]);
        assert_eq!(d2.result[1], d.result[1]);
    }

    #[test]
    fn merge_rejects_bad_input() {
        let spec = two_field_spec();
        let d = doc(&spec);
        let backwards = vec![ResultValue::Spans(vec![Span::labeled(5, 2, "NP")]), ResultValue::Choice(0)];
        assert!(matches!(merge_annotation(&d, &spec, 0, backwards), Err(MergeError::InvalidResult { component: 0, .. })));
        assert!(matches!(merge_annotation(&d, &spec, 2, vec![]), Err(MergeError::IndexOutOfRange { .. })));
        assert!(matches!(
            merge_annotation(&d, &spec, 0, vec![ResultValue::Choice(0)]),
            Err(MergeError::ArityMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn span_rules() {
        let text = Payload::Text("abcdef".into());
        let labeled = ComponentSpec::Selection { contents: vec!["A".into()] };
        let plain = ComponentSpec::Selection { contents: vec![] };
        let ok = |c: &ComponentSpec, spans: Vec<Span>| ResultValue::Spans(spans).conform(c, &text).is_ok();
        assert!(ok(&plain, vec![Span::new(0, 2), Span::new(2, 6)]));
        assert!(!ok(&plain, vec![Span::new(0, 3), Span::new(2, 6)]));
        assert!(!ok(&plain, vec![Span::new(0, 7)]));
        assert!(!ok(&plain, vec![Span::labeled(0, 1, "A")]));
        assert!(ok(&labeled, vec![Span::labeled(0, 1, "A")]));
        assert!(!ok(&labeled, vec![Span::labeled(0, 1, "B")]));
        assert!(!ok(&labeled, vec![Span::new(0, 1)]));
    }

    #[test]
    fn slider_accepts_integer_scores_within_bounds() {
        let slider = ComponentSpec::Slider { min: -3.0, max: 3.0, step: 1.0 };
        let src = Payload::Text(String::new());
        assert_eq!(ResultValue::Choice(2).conform(&slider, &src), Ok(ResultValue::Score(2.0)));
        assert!(ResultValue::Score(3.5).conform(&slider, &src).is_err());
    }

    #[test]
    fn result_cells_use_wrapped_wire_shape() {
        let spec = two_field_spec();
        let d = doc(&spec);
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["result"][0][0], serde_json::json!({"result": []}));
        assert_eq!(v["result"][0][1], serde_json::json!({"result": 0}));
        let spans = ResultValue::Spans(vec![Span::new(0, 2), Span::labeled(3, 4, "NP")]);
        assert_eq!(serde_json::to_string(&spans).unwrap(), r#"[[0,2],[3,4,"NP"]]"#);
    }
}
