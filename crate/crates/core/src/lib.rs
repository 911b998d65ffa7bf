//! Core of the quill annotation platform.
//!
//! - [`schema`]: declarative interface specs and task documents
//! - [`store`]: users, tasks, leases, annotation records, export
//! - [`al`]: multi-task active learning over a shared extractor
//! - [`demographic`]: annotator features prepended as pseudo-tokens
//! - [`prompt`]: few-shot prompting of a completion API
//! - [`bridge`]: converts between interface answers and model labels
//! - [`metrics`]: token accuracy and entity-level precision/recall/F1
//! - [`sim`]: simulated annotators, corpora, and experiment scenarios

pub mod al;
pub mod bridge;
pub mod demographic;
pub mod metrics;
pub mod prompt;
pub mod schema;
pub mod sim;
pub mod store;
