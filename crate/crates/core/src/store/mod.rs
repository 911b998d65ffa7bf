//! Users, tasks, assignments, leases and the append-only annotation log.
//!
//! The workflow is: an administrator creates a task and assigns
//! annotators; annotators pull the next instance under a lease and submit
//! results; the administrator exports the document with its records.

mod clock;
mod storage;
mod types;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};

pub use clock::{Clock, ManualClock, SystemClock};
pub use storage::{MemoryStorage, SqliteStorage, Storage};
pub use types::{
    AnnotationRecord, AssignmentPolicy, BackendKind, ExportDocument, NewTask, NextInstance, RecordLine, Role, Submission,
    SubmitOutcome, Task, TaskSummary, User,
};

use crate::demographic::DemographicProfile;
use crate::schema::{conform_results, validate_task_document, MergeError, TaskFile, Violation};

pub const DEFAULT_LEASE_MS: u64 = 30 * 60 * 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("operation requires an administrator")]
    PermissionDenied,
    #[error("document does not match its interface ({} violations)", .0.len())]
    ValidationFailed(Vec<Violation>),
    #[error("invalid submission: {0}")]
    InvalidSubmission(MergeError),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("user name `{0}` is taken")]
    DuplicateUser(String),
    #[error("only annotators can be assigned")]
    RoleMismatch,
    #[error("user is not assigned to this task")]
    NotAssigned,
    #[error("the lease on instance {0} expired and was taken over")]
    LeaseExpired(usize),
    #[error("instance {0} is leased to another annotator")]
    LeaseHeld(usize),
    #[error("instance {0} is already annotated")]
    AlreadyDone(usize),
    #[error("storage: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Lease {
    holder: String,
    served_at: u64,
    expires_at: u64,
}

#[derive(Default)]
struct Leases {
    /// Keyed by (task, instance); shared tasks hold one lease per holder.
    live: HashMap<(String, usize), Vec<Lease>>,
    /// (task, instance, holder) whose lease lapsed and went to someone else.
    lapsed: HashSet<(String, usize, String)>,
}

struct Inner {
    storage: Box<dyn Storage>,
    leases: Leases,
}

/// Thread-safe store. Every operation runs under one lock, so leases and
/// writes are linearizable.
pub struct Store {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    lease_ms: u64,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("lease_ms", &self.lease_ms).finish()
    }
}

impl Store {
    pub fn new(storage: Box<dyn Storage>) -> Self {
        Self::with_clock(storage, Arc::new(SystemClock))
    }

    pub fn in_memory() -> Self {
        Self::new(Box::new(MemoryStorage::default()))
    }

    pub fn with_clock(storage: Box<dyn Storage>, clock: Arc<dyn Clock>) -> Self {
        Self { inner: Mutex::new(Inner { storage, leases: Leases::default() }), clock, lease_ms: DEFAULT_LEASE_MS }
    }

    pub fn with_lease_ms(mut self, ms: u64) -> Self {
        self.lease_ms = ms;
        self
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("store lock poisoned")
    }

    pub fn register(&self, name: &str, role: Role, demographics: DemographicProfile) -> Result<User, StoreError> {
        let mut inner = self.lock();
        let users = inner.storage.users()?;
        if users.iter().any(|u| u.name == name) {
            return Err(StoreError::DuplicateUser(name.to_string()));
        }
        let user = User { user_id: format!("u{}", users.len() + 1), name: name.to_string(), role, demographics };
        inner.storage.insert_user(&user)?;
        Ok(user)
    }

    pub fn user(&self, user_id: &str) -> Result<User, StoreError> {
        self.lock().storage.users()?.into_iter().find(|u| u.user_id == user_id).ok_or_else(|| StoreError::UnknownUser(user_id.into()))
    }

    pub fn user_by_name(&self, name: &str) -> Result<User, StoreError> {
        self.lock().storage.users()?.into_iter().find(|u| u.name == name).ok_or_else(|| StoreError::UnknownUser(name.into()))
    }

    pub fn users(&self) -> Result<Vec<User>, StoreError> {
        self.lock().storage.users()
    }

    fn user_in(inner: &Inner, user_id: &str) -> Result<User, StoreError> {
        inner.storage.users()?.into_iter().find(|u| u.user_id == user_id).ok_or_else(|| StoreError::UnknownUser(user_id.into()))
    }

    fn task_in(inner: &Inner, task_id: &str) -> Result<Task, StoreError> {
        inner.storage.task(task_id)?.ok_or_else(|| StoreError::UnknownTask(task_id.into()))
    }

    fn require_admin(inner: &Inner, user_id: &str) -> Result<User, StoreError> {
        let user = Self::user_in(inner, user_id)?;
        if user.role != Role::Administrator {
            return Err(StoreError::PermissionDenied);
        }
        Ok(user)
    }

    pub fn create_task(&self, admin_id: &str, new: NewTask) -> Result<String, StoreError> {
        self.create_with_records(admin_id, new, Vec::new())
    }

    /// Like [`Store::create_task`], keeping prior `records` (a re-imported export).
    pub fn create_with_records(&self, admin_id: &str, new: NewTask, records: Vec<AnnotationRecord>) -> Result<String, StoreError> {
        let mut inner = self.lock();
        Self::require_admin(&inner, admin_id)?;
        let violations = validate_task_document(&new.document, &new.interface);
        if !violations.is_empty() {
            return Err(StoreError::ValidationFailed(violations));
        }
        let task_id = format!("task-{}", inner.storage.tasks()?.len() + 1);
        let task = Task {
            task_id: task_id.clone(),
            name: if new.name.is_empty() { task_id.clone() } else { new.name },
            interface: new.interface,
            document: new.document,
            assignees: Default::default(),
            backend: new.backend,
            backend_config: new.backend_config,
            policy: new.policy,
            created_by: admin_id.to_string(),
            created_at: self.clock.now_ms(),
            submissions: 0,
        };
        inner.storage.save_task(&task, &records)?;
        Ok(task_id)
    }

    /// Creates a task from an interchange file, keeping any `records`
    /// section so that a later export reproduces the file.
    pub fn import(&self, admin_id: &str, export: ExportDocument, backend: BackendKind, backend_config: serde_json::Value) -> Result<String, StoreError> {
        let new = NewTask {
            name: String::new(),
            interface: export.format,
            document: export.data,
            backend,
            backend_config,
            policy: AssignmentPolicy::Exclusive,
        };
        self.create_with_records(admin_id, new, export.records)
    }

    pub fn import_file(&self, admin_id: &str, file: TaskFile) -> Result<String, StoreError> {
        self.import(admin_id, ExportDocument { data: file.data, format: file.format, records: Vec::new() }, BackendKind::None, serde_json::Value::Null)
    }

    pub fn task(&self, task_id: &str) -> Result<Task, StoreError> {
        Self::task_in(&self.lock(), task_id)
    }

    pub fn tasks(&self) -> Result<Vec<Task>, StoreError> {
        self.lock().storage.tasks()
    }

    /// Tasks visible to `user_id`: all of them for administrators, the
    /// assigned ones for annotators.
    pub fn tasks_for(&self, user_id: &str) -> Result<Vec<TaskSummary>, StoreError> {
        let inner = self.lock();
        let user = Self::user_in(&inner, user_id)?;
        Ok(inner
            .storage
            .tasks()?
            .iter()
            .filter(|t| user.role == Role::Administrator || t.assignees.contains(user_id))
            .map(TaskSummary::from)
            .collect())
    }

    pub fn assign(&self, admin_id: &str, task_id: &str, annotator_id: &str) -> Result<(), StoreError> {
        let mut inner = self.lock();
        Self::require_admin(&inner, admin_id)?;
        let mut task = Self::task_in(&inner, task_id)?;
        if Self::user_in(&inner, annotator_id)?.role != Role::Annotator {
            return Err(StoreError::RoleMismatch);
        }
        if task.assignees.insert(annotator_id.to_string()) {
            inner.storage.save_task(&task, &[])?;
        }
        Ok(())
    }

    pub fn update_backend(&self, admin_id: &str, task_id: &str, backend: BackendKind, config: serde_json::Value) -> Result<(), StoreError> {
        let mut inner = self.lock();
        Self::require_admin(&inner, admin_id)?;
        let mut task = Self::task_in(&inner, task_id)?;
        task.backend = backend;
        task.backend_config = config;
        inner.storage.save_task(&task, &[])
    }

    /// Leases the lowest-index instance available to `user_id`, or `None`
    /// when nothing is left for them.
    pub fn next_instance(&self, task_id: &str, user_id: &str) -> Result<Option<NextInstance>, StoreError> {
        let mut inner = self.lock();
        let task = Self::task_in(&inner, task_id)?;
        Self::user_in(&inner, user_id)?;
        if !task.assignees.contains(user_id) {
            return Err(StoreError::NotAssigned);
        }
        let now = self.clock.now_ms();
        let annotated: HashSet<usize> = match task.policy {
            AssignmentPolicy::Exclusive => HashSet::new(),
            AssignmentPolicy::Shared => {
                inner.storage.records(task_id)?.iter().filter(|r| r.annotator_id == user_id).map(|r| r.instance_index).collect()
            }
        };
        let leases = &mut inner.leases;
        let pick = (0..task.document.len()).find(|&i| match task.policy {
            AssignmentPolicy::Exclusive => {
                task.document.done[i] == 0
                    && !leases.live.get(&(task_id.to_string(), i)).is_some_and(|ls| {
                        ls.iter().any(|l| l.holder != user_id && l.expires_at > now)
                    })
            }
            AssignmentPolicy::Shared => !annotated.contains(&i),
        });
        let Some(index) = pick else { return Ok(None) };
        let key = (task_id.to_string(), index);
        let slot = leases.live.entry(key).or_default();
        let served_at = slot.iter().find(|l| l.holder == user_id && l.expires_at > now).map_or(now, |l| l.served_at);
        if task.policy == AssignmentPolicy::Exclusive {
            for lapsed in slot.iter().filter(|l| l.holder != user_id) {
                leases.lapsed.insert((task_id.to_string(), index, lapsed.holder.clone()));
            }
            slot.clear();
        } else {
            slot.retain(|l| l.holder != user_id);
        }
        let expires_at = now + self.lease_ms;
        slot.push(Lease { holder: user_id.to_string(), served_at, expires_at });
        Ok(Some(NextInstance {
            instance_index: index,
            source: task.document.source[index].clone(),
            question: task.document.question[index].clone(),
            served_at,
            lease_expires_at: expires_at,
        }))
    }

    /// The live lease holders of one instance.
    pub fn lease_holders(&self, task_id: &str, index: usize) -> Vec<String> {
        let now = self.clock.now_ms();
        let inner = self.lock();
        inner
            .leases
            .live
            .get(&(task_id.to_string(), index))
            .map(|ls| ls.iter().filter(|l| l.expires_at > now).map(|l| l.holder.clone()).collect())
            .unwrap_or_default()
    }

    pub fn submit_annotation(&self, task_id: &str, user_id: &str, submission: Submission) -> Result<SubmitOutcome, StoreError> {
        let mut inner = self.lock();
        let mut task = Self::task_in(&inner, task_id)?;
        let user = Self::user_in(&inner, user_id)?;
        let is_admin = user.role == Role::Administrator;
        if !is_admin && !task.assignees.contains(user_id) {
            return Err(StoreError::NotAssigned);
        }
        let records = inner.storage.records(task_id)?;
        if let Some(key) = &submission.idempotency_key {
            if let Some(prev) = records.iter().find(|r| r.annotator_id == user_id && r.idempotency_key.as_ref() == Some(key)) {
                return Ok(SubmitOutcome { record: prev.clone(), replayed: true, submissions: task.submissions });
            }
        }
        let index = submission.instance_index;
        let conformed = conform_results(&task.interface, task.document.source.get(index), task.document.len(), index, submission.results)
            .map_err(StoreError::InvalidSubmission)?;

        let now = self.clock.now_ms();
        let key = (task_id.to_string(), index);
        let own_lease = inner.leases.live.get(&key).and_then(|ls| ls.iter().find(|l| l.holder == user_id)).cloned();
        if !is_admin && task.policy == AssignmentPolicy::Exclusive {
            let other_live = inner.leases.live.get(&key).is_some_and(|ls| ls.iter().any(|l| l.holder != user_id && l.expires_at > now));
            if other_live {
                let lapsed = inner.leases.lapsed.contains(&(task_id.to_string(), index, user_id.to_string()));
                return Err(if lapsed { StoreError::LeaseExpired(index) } else { StoreError::LeaseHeld(index) });
            }
            if task.document.done[index] == 1 {
                return Err(StoreError::AlreadyDone(index));
            }
        }

        let previous = records.iter().rev().find(|r| {
            r.instance_index == index && (task.policy == AssignmentPolicy::Exclusive || r.annotator_id == user_id)
        });
        let served_at = own_lease.as_ref().map(|l| l.served_at);
        let record = AnnotationRecord {
            seq: records.last().map_or(1, |r| r.seq + 1),
            instance_index: index,
            annotator_id: user_id.to_string(),
            results: conformed.clone(),
            submitted_at: now,
            served_at,
            duration_ms: served_at.map(|s| now.saturating_sub(s)),
            suggestion_shown: submission.suggestion_shown,
            accepted_unchanged: submission.accepted_unchanged,
            idempotency_key: submission.idempotency_key,
            supersedes: previous.map(|r| r.seq),
        };
        task.document.result[index] = conformed;
        task.document.done[index] = 1;
        task.submissions += 1;
        inner.storage.save_task(&task, std::slice::from_ref(&record))?;
        if let Some(ls) = inner.leases.live.get_mut(&key) {
            ls.retain(|l| l.holder != user_id);
        }
        inner.leases.lapsed.remove(&(task_id.to_string(), index, user_id.to_string()));
        Ok(SubmitOutcome { record, replayed: false, submissions: task.submissions })
    }

    /// Every record of a task, oldest first.
    pub fn records(&self, task_id: &str) -> Result<Vec<AnnotationRecord>, StoreError> {
        let inner = self.lock();
        Self::task_in(&inner, task_id)?;
        inner.storage.records(task_id)
    }

    /// Records not superseded by a later one.
    pub fn latest_records(&self, task_id: &str) -> Result<Vec<AnnotationRecord>, StoreError> {
        let records = self.records(task_id)?;
        let replaced: HashSet<u64> = records.iter().filter_map(|r| r.supersedes).collect();
        Ok(records.into_iter().filter(|r| !replaced.contains(&r.seq)).collect())
    }

    /// Latest labels per annotator: `instance → annotator → results`.
    pub fn label_matrix(&self, task_id: &str) -> Result<BTreeMap<usize, BTreeMap<String, Vec<crate::schema::ResultValue>>>, StoreError> {
        let mut out: BTreeMap<usize, BTreeMap<String, _>> = BTreeMap::new();
        for r in self.records(task_id)? {
            out.entry(r.instance_index).or_default().insert(r.annotator_id, r.results);
        }
        Ok(out)
    }

    pub fn export(&self, task_id: &str) -> Result<ExportDocument, StoreError> {
        let inner = self.lock();
        let task = Self::task_in(&inner, task_id)?;
        Ok(ExportDocument { data: task.document, format: task.interface, records: inner.storage.records(task_id)? })
    }

    /// One JSON object per line, one line per record.
    pub fn export_records_ndjson(&self, task_id: &str) -> Result<String, StoreError> {
        let mut out = String::new();
        for record in self.records(task_id)? {
            let line = RecordLine { task_id: task_id.to_string(), record };
            out.push_str(&serde_json::to_string(&line).map_err(|e| StoreError::Storage(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }
}
