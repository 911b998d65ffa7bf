use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::convert::{label_to_result, spans_to_bio, tokenize};
use super::{BridgeError, SuggestionBackend, SuggestionEnvelope};
use crate::al::Label;
use crate::prompt::{AuditLog, CompletionClient, FewShotExample, HttpCompletionClient, MockLlm, PromptBackend, PromptConfig};
use crate::schema::{empty_result_for, ComponentSpec, InterfaceSpec, ResultValue};
use crate::store::{AnnotationRecord, BackendKind, Task, User};

/// Offline completion stand-ins selectable from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockSpec {
    AllOutside,
    Canned(String),
    /// Sentence → space-joined gold tags.
    Gold(HashMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTaskConfig {
    #[serde(flatten)]
    pub prompt: PromptConfig,
    /// Component to fill; defaults to the first selection or dropdown.
    #[serde(default)]
    pub component: Option<usize>,
    /// Exemplars available before any annotation exists.
    #[serde(default)]
    pub examples: Vec<FewShotExample>,
    #[serde(default)]
    pub mock: Option<MockSpec>,
    #[serde(default)]
    pub audit_log: Option<PathBuf>,
}

/// Few-shot prompting back-end. Submitted annotations join the exemplar
/// pool; suggestions start once the pool holds `n_examples`.
pub struct PromptTaskBackend {
    config: PromptTaskConfig,
    spec: InterfaceSpec,
    component: usize,
    client: Arc<dyn CompletionClient>,
    waiting: RwLock<Vec<FewShotExample>>,
    backend: RwLock<Option<PromptBackend>>,
}

impl PromptTaskBackend {
    pub fn new(spec: &InterfaceSpec, config: PromptTaskConfig) -> Result<Self, BridgeError> {
        config.prompt.validate()?;
        let component = match config.component {
            Some(j) => j,
            None => spec
                .components()
                .iter()
                .position(|c| matches!(c, ComponentSpec::Selection { .. } | ComponentSpec::Dropdown { .. }))
                .ok_or_else(|| BridgeError::Unsupported("prompting needs a selection or dropdown component".into()))?,
        };
        if !matches!(spec.component(component), Some(ComponentSpec::Selection { .. } | ComponentSpec::Dropdown { .. })) {
            return Err(BridgeError::Config(format!("component {component} is not a selection or dropdown")));
        }
        let client: Arc<dyn CompletionClient> = match &config.mock {
            Some(MockSpec::AllOutside) => Arc::new(MockLlm::AllOutside),
            Some(MockSpec::Canned(t)) => Arc::new(MockLlm::Canned(t.clone())),
            Some(MockSpec::Gold(m)) => Arc::new(MockLlm::Gold(m.clone())),
            None => {
                if config.prompt.api.endpoint.is_empty() {
                    return Err(BridgeError::Config("api.endpoint is required unless a mock is configured".into()));
                }
                Arc::new(HttpCompletionClient::new(config.prompt.api.clone()))
            }
        };
        let this = Self {
            spec: spec.clone(),
            component,
            client,
            waiting: RwLock::new(Vec::new()),
            backend: RwLock::new(None),
            config,
        };
        for ex in this.config.examples.clone() {
            this.add_example(ex)?;
        }
        Ok(this)
    }

    fn add_example(&self, ex: FewShotExample) -> Result<(), BridgeError> {
        if let Some(b) = self.backend.write().expect("prompt lock poisoned").as_mut() {
            b.add_example(ex);
            return Ok(());
        }
        let mut waiting = self.waiting.write().expect("prompt lock poisoned");
        waiting.push(ex);
        let eligible = waiting
            .iter()
            .filter(|e| e.sentence.split_whitespace().count() <= self.config.prompt.max_example_tokens)
            .count();
        if eligible >= self.config.prompt.n_examples {
            let mut backend = PromptBackend::new(self.config.prompt.clone(), std::mem::take(&mut *waiting), self.client.clone())?;
            if let Some(path) = &self.config.audit_log {
                backend = backend.with_audit(AuditLog::open(path)?);
            }
            *self.backend.write().expect("prompt lock poisoned") = Some(backend);
        }
        Ok(())
    }
}

impl SuggestionBackend for PromptTaskBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Prompt
    }

    fn suggest(&self, task: &Task, index: usize, _: &User) -> Result<Option<SuggestionEnvelope>, BridgeError> {
        let guard = self.backend.read().expect("prompt lock poisoned");
        let Some(backend) = guard.as_ref() else { return Ok(None) };
        let Some(text) = task.document.source.get(index).and_then(|s| s.as_text()) else { return Ok(None) };
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Ok(None);
        }
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
        let s = backend.suggest(&words)?;
        let component = &self.spec.components()[self.component];
        let mut results: Vec<ResultValue> = self.spec.components().iter().map(empty_result_for).collect();
        if let Some(v) = label_to_result(component, &tokens, &Label::Sequence(s.tags)) {
            results[self.component] = v;
        }
        Ok(Some(SuggestionEnvelope {
            backend: BackendKind::Prompt,
            results,
            suggested_components: vec![self.component],
            confidence: None,
            model_snapshot_id: None,
            prompt_log_id: Some(s.prompt_log_id),
        }))
    }

    fn observe(&self, task: &Task, record: &AnnotationRecord, _: &User) -> Result<(), BridgeError> {
        let Some(text) = task.document.source.get(record.instance_index).and_then(|s| s.as_text()) else { return Ok(()) };
        let Some(ResultValue::Spans(spans)) = record.results.get(self.component) else { return Ok(()) };
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Ok(());
        }
        let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        let tags = spans_to_bio(&tokens, spans);
        self.add_example(FewShotExample::from_tagged(&words, &tags, &self.config.prompt.task_name))
    }

    fn status(&self) -> Value {
        let pool = self.backend.read().expect("prompt lock poisoned").as_ref().map(|b| b.pool_size());
        json!({
            "backend": "prompt",
            "component": self.component,
            "ready": pool.is_some(),
            "exemplars": pool.unwrap_or_else(|| self.waiting.read().expect("prompt lock poisoned").len()),
            "n_examples": self.config.prompt.n_examples,
            "strategy": self.config.prompt.strategy,
        })
    }
}
