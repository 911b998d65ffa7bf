//! Binds tasks in the store to suggestion back-ends.
//!
//! A back-end turns an instance into per-component suggested answers and
//! learns from submitted records. Active-learning back-ends retrain in
//! the background and publish immutable model snapshots.

mod al_backend;
mod convert;
mod prompt_task;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use al_backend::{AlBackend, AlBackendConfig};
pub use convert::{
    bindings_for, bio_label_set, bio_to_spans, head_id, label_to_result, labeled_instances, spans_to_bio, to_instance,
    tokenize, HeadBinding, Token, SPAN_KIND,
};
pub use prompt_task::{MockSpec, PromptTaskBackend, PromptTaskConfig};

use crate::al::AlError;
use crate::demographic::DemoError;
use crate::prompt::PromptError;
use crate::schema::ResultValue;
use crate::store::{AnnotationRecord, BackendKind, Task, User};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BridgeError {
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("backend cannot serve this interface: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] AlError),
    #[error(transparent)]
    Demographic(#[from] DemoError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Suggested answers for one instance, with where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionEnvelope {
    pub backend: BackendKind,
    /// One answer per interface component; unmodeled components hold
    /// their empty value.
    pub results: Vec<ResultValue>,
    /// Indices of the components the back-end actually predicted.
    pub suggested_components: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_snapshot_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_log_id: Option<String>,
}

pub trait SuggestionBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// `None` when the back-end has nothing to offer yet.
    fn suggest(&self, task: &Task, index: usize, annotator: &User) -> Result<Option<SuggestionEnvelope>, BridgeError>;

    /// Learns from one accepted submission.
    fn observe(&self, task: &Task, record: &AnnotationRecord, annotator: &User) -> Result<(), BridgeError>;

    /// Whether the submission count calls for a retrain.
    fn wants_retrain(&self, _submissions: u64) -> bool {
        false
    }

    /// Retrains and publishes a new snapshot, returning its id.
    fn retrain(&self) -> Result<u64, BridgeError> {
        Ok(self.snapshot_id())
    }

    /// Id of the published snapshot; 0 before the first one.
    fn snapshot_id(&self) -> u64 {
        0
    }

    fn status(&self) -> Value;
}

#[derive(Debug, Default)]
pub struct NoBackend;

impl SuggestionBackend for NoBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::None
    }

    fn suggest(&self, _: &Task, _: usize, _: &User) -> Result<Option<SuggestionEnvelope>, BridgeError> {
        Ok(None)
    }

    fn observe(&self, _: &Task, _: &AnnotationRecord, _: &User) -> Result<(), BridgeError> {
        Ok(())
    }

    fn status(&self) -> Value {
        serde_json::json!({ "backend": "none" })
    }
}

/// Builds the back-end a task's config asks for.
pub fn build_backend(task: &Task) -> Result<Arc<dyn SuggestionBackend>, BridgeError> {
    Ok(match task.backend {
        BackendKind::None => Arc::new(NoBackend),
        BackendKind::Mtal | BackendKind::DemographicAl => {
            let config: AlBackendConfig = parse_config(&task.backend_config)?;
            Arc::new(AlBackend::new(task.backend, &task.interface, config)?)
        }
        BackendKind::Prompt => {
            let config: PromptTaskConfig = parse_config(&task.backend_config)?;
            Arc::new(PromptTaskBackend::new(&task.interface, config)?)
        }
    })
}

fn parse_config<T: serde::de::DeserializeOwned>(raw: &Value) -> Result<T, BridgeError> {
    let raw = if raw.is_null() { Value::Object(Default::default()) } else { raw.clone() };
    serde_json::from_value(raw).map_err(|e| BridgeError::Config(e.to_string()))
}
