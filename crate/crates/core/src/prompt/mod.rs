//! Few-shot prompting of a completion API for sequence-labeling
//! suggestions.
//!
//! A prompt is a run of `Given the sentence `` … '' the <task> are `` … ''`
//! clauses, one per exemplar, followed by the target clause left open
//! after `are`. Exemplars are drawn at random or by embedding similarity.

mod audit;
mod backend;
mod embed;
mod llm;
mod parse;
mod select;
mod template;

pub use audit::{AuditEntry, AuditLog};
pub use backend::{PromptBackend, PromptSuggestion};
pub use embed::{EmbeddingProvider, EncoderEmbedder, HashedBow};
pub use llm::{ApiConfig, Completion, CompletionClient, HttpCompletionClient, MockLlm, DEFAULT_KEY_ENV};
pub use parse::{parse_tags, ParsedTags};
pub use select::{cosine, select_random, select_similar, Strategy};
pub use template::{build_prompt, prompt_tokens, target_sentence, FewShotExample, PromptConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("at least one exemplar is required")]
    EmptyExamples,
    #[error("asked for {requested} exemplars but the pool has {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("vector dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("prompt has {tokens} tokens, over the limit of {limit}")]
    ContextLengthExceeded { tokens: usize, limit: usize },
    #[error("completion API returned status {status}: {body}")]
    ApiError { status: u16, body: String },
    #[error("completion API timed out")]
    Timeout,
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingCredential(String),
    #[error("invalid prompt config: {0}")]
    InvalidConfig(String),
    #[error("audit log: {0}")]
    Audit(String),
}
