use serde::{Deserialize, Serialize};

use super::llm::ApiConfig;
use super::select::Strategy;
use super::PromptError;

const OPEN: &str = "``";
const CLOSE: &str = "''";

/// One solved exemplar. `answer` is the space-joined tag sequence, bare;
/// the template adds the quote marks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub sentence: String,
    #[serde(default)]
    pub task_name: String,
    pub answer: String,
}

impl FewShotExample {
    pub fn new(sentence: impl Into<String>, task_name: impl Into<String>, answer: impl Into<String>) -> Self {
        Self { sentence: sentence.into(), task_name: task_name.into(), answer: answer.into() }
    }

    /// Builds an exemplar from aligned tokens and tags.
    pub fn from_tagged<S: AsRef<str>, T: AsRef<str>>(tokens: &[S], tags: &[T], task_name: &str) -> Self {
        let join = |xs: &mut dyn Iterator<Item = &str>| xs.collect::<Vec<_>>().join(" ");
        Self {
            sentence: join(&mut tokens.iter().map(|t| t.as_ref())),
            task_name: task_name.to_string(),
            answer: join(&mut tags.iter().map(|t| t.as_ref())),
        }
    }

    /// Whether the answer has one tag per sentence token.
    pub fn is_aligned(&self) -> bool {
        self.sentence.split_whitespace().count() == self.answer.split_whitespace().count()
    }
}

fn default_n() -> usize {
    10
}

fn default_max_example_tokens() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    #[serde(default = "default_n")]
    pub n_examples: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub api: ApiConfig,
    pub task_name: String,
    /// Exemplars with more tokens than this are skipped during selection.
    #[serde(default = "default_max_example_tokens")]
    pub max_example_tokens: usize,
}

impl PromptConfig {
    pub fn new(task_name: impl Into<String>) -> Self {
        Self {
            n_examples: default_n(),
            strategy: Strategy::default(),
            seed: 0,
            api: ApiConfig::default(),
            task_name: task_name.into(),
            max_example_tokens: default_max_example_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.n_examples == 0 {
            return Err(PromptError::InvalidConfig("n_examples must be at least 1".into()));
        }
        if self.task_name.trim().is_empty() {
            return Err(PromptError::InvalidConfig("task_name must be non-empty".into()));
        }
        Ok(())
    }
}

fn clause(sentence: &str, task_name: &str) -> String {
    format!("Given the sentence {OPEN} {sentence} {CLOSE} the {task_name} are")
}

/// Renders the exemplars and the open target clause.
pub fn build_prompt(examples: &[FewShotExample], target_sentence: &str, task_name: &str) -> Result<String, PromptError> {
    if examples.is_empty() {
        return Err(PromptError::EmptyExamples);
    }
    let mut parts: Vec<String> = examples
        .iter()
        .map(|ex| format!("{} {OPEN} {} {CLOSE}", clause(&ex.sentence, task_name), ex.answer))
        .collect();
    parts.push(clause(target_sentence, task_name));
    Ok(parts.join("\n\n"))
}

/// The target sentence of a prompt built by [`build_prompt`].
pub fn target_sentence(prompt: &str) -> Option<&str> {
    let last = prompt.rsplit("\n\n").next()?;
    let rest = last.strip_prefix("Given the sentence ``")?;
    let end = rest.rfind("'' the ")?;
    Some(rest[..end].trim())
}

/// Length measure for the context limit: whitespace-separated tokens.
pub fn prompt_tokens(prompt: &str) -> usize {
    prompt.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_example_has_one_separator_and_open_target() {
        let ex = FewShotExample::new("Paris", "ner", "B-LOC");
        let p = build_prompt(&[ex], "Rome", "ner").unwrap();
        assert_eq!(p.matches("\n\n").count(), 1);
        assert_eq!(p, "Given the sentence `` Paris '' the ner are `` B-LOC ''\n\nGiven the sentence `` Rome '' the ner are");
        assert!(p.ends_with(" are"));
    }

    #[test]
    fn empty_examples() {
        assert_eq!(build_prompt(&[], "x", "ner"), Err(PromptError::EmptyExamples));
    }

    #[test]
    fn target_sentence_is_recoverable() {
        let ex = FewShotExample::new("a b", "ner", "O O");
        let p = build_prompt(&[ex], "Longyear is a town", "ner").unwrap();
        assert_eq!(target_sentence(&p), Some("Longyear is a town"));
    }

    #[test]
    fn alignment_check() {
        assert!(FewShotExample::from_tagged(&["a", "b"], &["O", "B-X"], "t").is_aligned());
        assert!(!FewShotExample::new("a b", "t", "O").is_aligned());
    }
}
