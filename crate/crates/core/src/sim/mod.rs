//! Simulated annotators, gold corpora, and the experiment scenarios that
//! compare selection and training strategies at desk scale.

mod annotator;
mod corpus;
mod report;
mod scenario;

pub use annotator::{drive_store_task, SimulatedAnnotator};
pub use corpus::{
    class_label, generate_demographic_corpus, generate_two_task_corpus, parse_conll, read_conll, text_only_bayes_bound,
    to_conll, ConllColumns, Corpus, DemoItem, DemographicCorpus, DemographicParams, Sentence, SyntheticParams, N_CLASSES,
};
pub use report::{area_under_curve, MetricReport, RoundRow};
pub use scenario::{
    run_scenario, CorpusSource, MockKind, Scenario, ScenarioOutput, SelectionStrategy, SimConfig, DEFAULT_AGES,
};

use crate::al::AlError;
use crate::metrics::MetricsError;
use crate::prompt::PromptError;
use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("missing gold labels: {0}")]
    MissingGold(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Model(#[from] AlError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Demographic(#[from] crate::demographic::DemoError),
}
