//! Token accuracy and entity-level precision / recall / F1 for BIO tags.
//!
//! Entity scores ignore `O`: a prediction of all `O` earns credit for
//! every outside token in accuracy and nothing in F1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[non_exhaustive]
pub enum LabelScheme {
    /// `B-X` opens an entity of type `X`, `I-X` continues it, `O` is
    /// outside. An `I-X` that does not continue an `X` opens a new one.
    #[default]
    Bio,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub kind: String,
}

enum Tag<'a> {
    Begin(&'a str),
    Inside(&'a str),
    Outside,
}

fn parse_tag(tag: &str) -> Tag<'_> {
    if let Some(k) = tag.strip_prefix("B-") {
        Tag::Begin(k)
    } else if let Some(k) = tag.strip_prefix("I-") {
        Tag::Inside(k)
    } else {
        Tag::Outside
    }
}

/// Extracts entity spans from one tag sequence.
pub fn bio_spans<S: AsRef<str>>(tags: &[S]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref()) {
            Tag::Begin(kind) => {
                if let Some((s, k)) = open.take() {
                    spans.push(EntitySpan { start: s, end: i, kind: k.to_string() });
                }
                open = Some((i, kind));
            }
            Tag::Inside(kind) => match open {
                Some((_, k)) if k == kind => {}
                _ => {
                    if let Some((s, k)) = open.take() {
                        spans.push(EntitySpan { start: s, end: i, kind: k.to_string() });
                    }
                    open = Some((i, kind));
                }
            },
            Tag::Outside => {
                if let Some((s, k)) = open.take() {
                    spans.push(EntitySpan { start: s, end: i, kind: k.to_string() });
                }
            }
        }
    }
    if let Some((s, k)) = open {
        spans.push(EntitySpan { start: s, end: tags.len(), kind: k.to_string() });
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tokens: usize,
    pub gold_entities: usize,
    pub predicted_entities: usize,
    pub correct_entities: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("sentence {sentence}: {preds} predicted tags for {golds} gold tags")]
    LengthMismatch { sentence: usize, preds: usize, golds: usize },
}

/// Micro-averaged scores over aligned sentences. Undefined ratios (no
/// predicted or no gold entities) score 0, as conlleval does.
pub fn evaluate_sequence_labeling<S: AsRef<str>, T: AsRef<str>>(
    preds: &[Vec<S>],
    golds: &[Vec<T>],
    _scheme: LabelScheme,
) -> Result<SequenceMetrics, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { sentence: preds.len().min(golds.len()), preds: preds.len(), golds: golds.len() });
    }
    let mut m = SequenceMetrics::default();
    let mut matched_tokens = 0usize;
    for (i, (p, g)) in preds.iter().zip(golds).enumerate() {
        if p.len() != g.len() {
            return Err(MetricsError::LengthMismatch { sentence: i, preds: p.len(), golds: g.len() });
        }
        m.tokens += g.len();
        matched_tokens += p.iter().zip(g).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
        let ps = bio_spans(p);
        let gs = bio_spans(g);
        m.predicted_entities += ps.len();
        m.gold_entities += gs.len();
        m.correct_entities += ps.iter().filter(|s| gs.contains(s)).count();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    m.accuracy = ratio(matched_tokens, m.tokens);
    m.precision = ratio(m.correct_entities, m.predicted_entities);
    m.recall = ratio(m.correct_entities, m.gold_entities);
    m.f1 = if m.precision + m.recall == 0.0 { 0.0 } else { 2.0 * m.precision * m.recall / (m.precision + m.recall) };
    Ok(m)
}
