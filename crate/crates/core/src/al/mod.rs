//! Multi-task active learning: a shared feature extractor with one linear
//! head per task, softmax confidence, least-confidence querying, and
//! joint-loss training.

mod encoder;
mod features;
mod math;
mod model;
mod query;
mod snapshot;

pub use encoder::{EncoderClient, EncoderEndpoint};
pub use features::{Encoded, NativeConfig, NativeExtractor, FEATURES_PER_TOKEN};
pub use math::{argmax, joint_loss, softmax};
pub use model::{
    aggregate_confidence, instance_confidence, suggest, suggest_with, train, train_in_place, BatchLoss, Extractor,
    Gradients, HeadGrad, HeadSpec, Instance, InstanceId, Label, MultiTaskModel, ParamId, TaskHead, TaskKind,
    TaskSuggestion, TrainStats,
};
pub use query::{least_confident, select_queries, ALConfig, ConfidenceAgg, PoolState};
pub use snapshot::{ModelSnapshot, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlError {
    #[error("logits must be non-empty and finite")]
    NonFiniteInput,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("no alpha weight for task `{0}`")]
    MissingAlpha(String),
    #[error("the unlabeled pool is empty")]
    EmptyPool,
    #[error("instance {0} is not in the corpus")]
    UnknownInstance(InstanceId),
    #[error("no labeled data to train on")]
    NoLabeledData,
    #[error("instance {0} has no label for any task in the model")]
    Unlabeled(InstanceId),
    #[error("model has not been trained yet")]
    UntrainedModel,
    #[error("task `{task}` has no label `{label}`")]
    UnknownLabel { task: String, label: String },
    #[error("task `{task}`: expected {expected} labels, got {found}")]
    LabelLength { task: String, expected: usize, found: usize },
    #[error("task `{0}`: label shape does not match the head kind")]
    LabelShape(String),
    #[error("task `{0}` needs at least two labels")]
    TooFewLabels(String),
    #[error("instances need at least one token")]
    EmptyInstance,
    #[error("encoder: {0}")]
    Encoder(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
}
