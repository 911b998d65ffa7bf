use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::audit::{AuditEntry, AuditLog};
use super::embed::{EmbeddingProvider, HashedBow};
use super::llm::CompletionClient;
use super::parse::parse_tags;
use super::select::{select_random, select_similar, Strategy};
use super::template::{build_prompt, prompt_tokens, FewShotExample, PromptConfig};
use super::PromptError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSuggestion {
    pub tags: Vec<String>,
    pub mismatch: bool,
    pub prompt_log_id: String,
    pub retries: u32,
}

/// Exemplar pool, selection strategy and completion client for one task.
pub struct PromptBackend {
    pub config: PromptConfig,
    train: Vec<FewShotExample>,
    embedder: Arc<dyn EmbeddingProvider>,
    client: Arc<dyn CompletionClient>,
    audit: Option<AuditLog>,
    counter: AtomicU64,
}

impl std::fmt::Debug for PromptBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PromptBackend").field("config", &self.config).field("train", &self.train.len()).finish()
    }
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl PromptBackend {
    pub fn new(config: PromptConfig, train: Vec<FewShotExample>, client: Arc<dyn CompletionClient>) -> Result<Self, PromptError> {
        config.validate()?;
        let train: Vec<FewShotExample> =
            train.into_iter().filter(|ex| ex.sentence.split_whitespace().count() <= config.max_example_tokens).collect();
        if train.len() < config.n_examples {
            return Err(PromptError::PoolTooSmall { requested: config.n_examples, available: train.len() });
        }
        Ok(Self {
            config,
            train,
            embedder: Arc::new(HashedBow::default()),
            client,
            audit: None,
            counter: AtomicU64::new(0),
        })
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn with_audit(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    /// Adds an exemplar unless it exceeds the token cap.
    pub fn add_example(&mut self, example: FewShotExample) {
        if example.sentence.split_whitespace().count() <= self.config.max_example_tokens {
            self.train.push(example);
        }
    }

    pub fn pool_size(&self) -> usize {
        self.train.len()
    }

    /// Exemplars for `target`. Random draws are seeded by the config seed
    /// and the target text, so a sentence always sees the same exemplars.
    pub fn exemplars(&self, target: &str) -> Result<Vec<FewShotExample>, PromptError> {
        let n = self.config.n_examples;
        match self.config.strategy {
            Strategy::Random => select_random(&self.train, n, self.config.seed ^ fnv(target)),
            Strategy::Similar => select_similar(&self.train, target, n, self.embedder.as_ref()),
        }
    }

    pub fn prompt_for(&self, tokens: &[String]) -> Result<String, PromptError> {
        let target = tokens.join(" ");
        build_prompt(&self.exemplars(&target)?, &target, &self.config.task_name)
    }

    /// Queries the completion API for one tag per token.
    pub fn suggest(&self, tokens: &[String]) -> Result<PromptSuggestion, PromptError> {
        let prompt = self.prompt_for(tokens)?;
        let id = format!("prompt-{}", self.counter.fetch_add(1, Ordering::SeqCst) + 1);
        let outcome = self.client.complete(&prompt);
        let (completion, error, retries) = match &outcome {
            Ok(c) => (Some(c.text.clone()), None, c.retries),
            Err(e) => (None, Some(e.to_string()), 0),
        };
        let parsed = parse_tags(completion.as_deref().unwrap_or(""), tokens.len());
        if let Some(log) = &self.audit {
            let entry = AuditEntry {
                id: id.clone(),
                unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
                task_name: self.config.task_name.clone(),
                prompt_tokens: prompt_tokens(&prompt),
                prompt,
                completion,
                error,
                retries,
                tags: if outcome.is_ok() { parsed.tags.clone() } else { Vec::new() },
                mismatch: parsed.mismatch,
            };
            log.append(&entry)?;
        }
        outcome?;
        Ok(PromptSuggestion { tags: parsed.tags, mismatch: parsed.mismatch, prompt_log_id: id, retries })
    }
}
