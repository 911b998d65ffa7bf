//! Conversions between interface answers and model labels.

use serde::{Deserialize, Serialize};

use crate::al::{HeadSpec, Instance, Label, TaskKind};
use crate::metrics::bio_spans;
use crate::schema::{ComponentSpec, InterfaceSpec, Payload, ResultValue, Span, TaskDocument};

/// Tag kind used for spans of an unlabeled selection.
pub const SPAN_KIND: &str = "SPAN";

/// A whitespace-delimited token with character offsets into its text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            if let Some((start, word)) = current.take() {
                out.push(Token { end: start + word.chars().count(), text: word, start });
            }
        } else {
            current.get_or_insert_with(|| (i, String::new())).1.push(ch);
        }
    }
    if let Some((start, word)) = current {
        out.push(Token { end: start + word.chars().count(), text: word, start });
    }
    out
}

fn kind_of(span: &Span) -> &str {
    span.label.as_deref().unwrap_or(SPAN_KIND)
}

/// BIO tags for `tokens`: a token belongs to a span when their character
/// ranges overlap; the first such token opens the entity.
pub fn spans_to_bio(tokens: &[Token], spans: &[Span]) -> Vec<String> {
    let mut tags = vec!["O".to_string(); tokens.len()];
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort();
    for span in sorted {
        let mut first = true;
        for (i, t) in tokens.iter().enumerate() {
            if t.start < span.end && span.start < t.end && tags[i] == "O" {
                tags[i] = format!("{}-{}", if first { "B" } else { "I" }, kind_of(span));
                first = false;
            }
        }
    }
    tags
}

/// Character spans covering each entity in `tags`.
pub fn bio_to_spans<S: AsRef<str>>(tokens: &[Token], tags: &[S], labeled: bool) -> Vec<Span> {
    bio_spans(tags)
        .into_iter()
        .filter(|e| e.end <= tokens.len())
        .map(|e| Span {
            start: tokens[e.start].start,
            end: tokens[e.end - 1].end,
            label: labeled.then_some(e.kind),
        })
        .collect()
}

/// Label set of the sequence head behind a selection or dropdown.
pub fn bio_label_set(contents: &[String]) -> Vec<String> {
    let kinds: Vec<&str> = if contents.is_empty() { vec![SPAN_KIND] } else { contents.iter().map(String::as_str).collect() };
    std::iter::once("O".to_string()).chain(kinds.iter().flat_map(|k| [format!("B-{k}"), format!("I-{k}")])).collect()
}

/// Ties one interface component to one model head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadBinding {
    pub component: usize,
    pub head: HeadSpec,
}

/// Head id for component `j`.
pub fn head_id(component: usize) -> String {
    format!("c{component}")
}

/// Heads for every component a model can suggest: selections and
/// dropdowns become sequence heads, buttons classification heads.
pub fn bindings_for(spec: &InterfaceSpec) -> Vec<HeadBinding> {
    spec.components()
        .iter()
        .enumerate()
        .filter_map(|(j, c)| {
            let (kind, labels) = match c {
                ComponentSpec::Selection { contents } | ComponentSpec::Dropdown { contents } => {
                    (TaskKind::Sequence, bio_label_set(contents))
                }
                ComponentSpec::Button { contents } if contents.len() >= 2 => (TaskKind::Classification, contents.clone()),
                _ => return None,
            };
            Some(HeadBinding { component: j, head: HeadSpec { task_id: head_id(j), kind, labels } })
        })
        .collect()
}

/// The instance text of a document row; tables carry none.
pub fn text_of(source: &Payload) -> Option<&str> {
    source.as_text()
}

/// A model instance for row `index`, labeled from `results` when given.
pub fn to_instance(
    source: &Payload,
    index: usize,
    spec: &InterfaceSpec,
    bindings: &[HeadBinding],
    results: Option<&[ResultValue]>,
) -> Option<Instance> {
    let text = text_of(source)?;
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    let mut inst = Instance::new(index as u64, tokens.iter().map(|t| t.text.clone()).collect());
    if let Some(results) = results {
        for b in bindings {
            let label = match (spec.component(b.component)?, results.get(b.component)?) {
                (ComponentSpec::Button { contents }, ResultValue::Choice(i)) => Label::Single(contents.get(*i)?.clone()),
                (ComponentSpec::Selection { .. } | ComponentSpec::Dropdown { .. }, ResultValue::Spans(spans)) => {
                    Label::Sequence(spans_to_bio(&tokens, spans))
                }
                _ => continue,
            };
            inst.labels.insert(b.head.task_id.clone(), label);
        }
    }
    Some(inst)
}

/// Labeled instances for every done row of `doc`.
pub fn labeled_instances(doc: &TaskDocument, spec: &InterfaceSpec, bindings: &[HeadBinding]) -> Vec<Instance> {
    (0..doc.len())
        .filter(|&i| doc.done[i] == 1)
        .filter_map(|i| to_instance(&doc.source[i], i, spec, bindings, Some(&doc.result[i])))
        .filter(|inst| !inst.labels.is_empty())
        .collect()
}

/// Converts one head's predicted label back into a component answer.
pub fn label_to_result(component: &ComponentSpec, tokens: &[Token], label: &Label) -> Option<ResultValue> {
    match (component, label) {
        (ComponentSpec::Button { contents }, Label::Single(l)) => contents.iter().position(|c| c == l).map(ResultValue::Choice),
        (ComponentSpec::Selection { contents } | ComponentSpec::Dropdown { contents }, Label::Sequence(tags)) => {
            let spans = bio_to_spans(tokens, tags, !contents.is_empty());
            let kept = spans
                .into_iter()
                .filter(|s| s.label.as_ref().is_none_or(|l| contents.contains(l)))
                .collect();
            Some(ResultValue::Spans(kept))
        }
        _ => None,
    }
}
