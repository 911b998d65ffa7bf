//! Interface and task files shipped with the crate.
//!
//! The predefined interfaces are what administrators pick from as an
//! "annotation type" when they do not upload their own format.

use super::{parse_interface_spec, InterfaceSpec};

/// Multi-component custom interface (span, textbox, 3-way button,
/// NP/PP/VP tagging, textbox) over two passages.
pub const CUSTOM_TASK: &str = include_str!("../../fixtures/custom_multi_question.json");

/// Chinese sentiment task: 3-way and 7-way button rows over three poems.
pub const SENTIMENT_TASK: &str = include_str!("../../fixtures/poem_sentiment.json");

pub const PREDEFINED: &[(&str, &str)] = &[
    ("text_summarization", include_str!("../../fixtures/interfaces/text_summarization.json")),
    ("fake_news_detection", include_str!("../../fixtures/interfaces/fake_news_detection.json")),
    ("chinese_word_segmentation", include_str!("../../fixtures/interfaces/chinese_word_segmentation.json")),
    ("text_to_sql", include_str!("../../fixtures/interfaces/text_to_sql.json")),
    ("text_chunking", include_str!("../../fixtures/interfaces/text_chunking.json")),
    ("semantic_similarity", include_str!("../../fixtures/interfaces/semantic_similarity.json")),
    ("evidence_qa", include_str!("../../fixtures/interfaces/evidence_qa.json")),
];

pub fn predefined_interface(name: &str) -> Option<InterfaceSpec> {
    PREDEFINED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_interface_spec(text).expect("shipped interface fixtures are valid"))
}
