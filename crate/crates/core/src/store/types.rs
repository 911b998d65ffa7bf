use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::demographic::DemographicProfile;
use crate::schema::{InterfaceSpec, Payload, ResultValue, TaskDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Administrator,
    Annotator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub user_id: String,
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub demographics: DemographicProfile,
}

/// Which suggestion back-end serves a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    None,
    Mtal,
    DemographicAl,
    Prompt,
}

/// Whether an instance is annotated once, or once per assignee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentPolicy {
    #[default]
    Exclusive,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub name: String,
    pub interface: InterfaceSpec,
    pub document: TaskDocument,
    pub assignees: BTreeSet<String>,
    pub backend: BackendKind,
    #[serde(default)]
    pub backend_config: Value,
    #[serde(default)]
    pub policy: AssignmentPolicy,
    pub created_by: String,
    pub created_at: u64,
    /// Accepted submissions, replays excluded.
    #[serde(default)]
    pub submissions: u64,
}

/// Everything needed to create a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewTask {
    #[serde(default)]
    pub name: String,
    pub interface: InterfaceSpec,
    pub document: TaskDocument,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub backend_config: Value,
    #[serde(default)]
    pub policy: AssignmentPolicy,
}

/// One submission. Records are never rewritten; a later record for the
/// same instance supersedes an earlier one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    /// Per-task sequence number, starting at 1.
    pub seq: u64,
    pub instance_index: usize,
    pub annotator_id: String,
    pub results: Vec<ResultValue>,
    /// UTC milliseconds.
    pub submitted_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub served_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion_shown: Option<Vec<ResultValue>>,
    #[serde(default)]
    pub accepted_unchanged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    /// `seq` of the record this one replaced as latest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
}

/// A record line in the NDJSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub task_id: String,
    #[serde(flatten)]
    pub record: AnnotationRecord,
}

/// What an annotator submits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Submission {
    pub instance_index: usize,
    pub results: Vec<ResultValue>,
    #[serde(default)]
    pub suggestion_shown: Option<Vec<ResultValue>>,
    #[serde(default)]
    pub accepted_unchanged: bool,
    #[serde(default)]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub record: AnnotationRecord,
    /// The idempotency key matched an earlier submission; nothing changed.
    pub replayed: bool,
    pub submissions: u64,
}

/// An instance handed to an annotator, leased until `lease_expires_at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextInstance {
    pub instance_index: usize,
    pub source: Payload,
    pub question: Vec<String>,
    pub served_at: u64,
    pub lease_expires_at: u64,
}

/// The interchange shape with the submission history appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub data: TaskDocument,
    pub format: InterfaceSpec,
    #[serde(default)]
    pub records: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub name: String,
    pub backend: BackendKind,
    pub policy: AssignmentPolicy,
    pub instances: usize,
    pub done: usize,
    pub assignees: BTreeSet<String>,
}

impl From<&Task> for TaskSummary {
    fn from(t: &Task) -> Self {
        Self {
            task_id: t.task_id.clone(),
            name: t.name.clone(),
            backend: t.backend,
            policy: t.policy,
            instances: t.document.len(),
            done: t.document.done_count(),
            assignees: t.assignees.clone(),
        }
    }
}
