//! Declarative interface specs and the task-document data model.
//!
//! Both travel as JSON using the keys `data`, `source`, `question`,
//! `result`, `done`, `format`, `type`, `properties` and `contents`.

mod component;
mod document;
pub mod fixtures;

pub use component::{parse_interface_spec, ComponentKind, ComponentSpec, InterfaceSpec};
pub(crate) use document::conform_results;
pub use document::{
    empty_result_for, merge_annotation, parse_task_file, validate_task_document, MergeError, Payload, ResultValue,
    Rule, Span, TaskDocument, TaskFile, Violation,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("component {index}: unknown component type `{kind}`")]
    UnknownComponentKind { index: usize, kind: String },
    #[error("{}invalid properties: {reason}", index.map(|i| format!("component {i}: ")).unwrap_or_default())]
    InvalidProperties { index: Option<usize>, reason: String },
}
