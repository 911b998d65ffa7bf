use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use proptest::prelude::*;
use quill_core::schema::fixtures::{CUSTOM_TASK, SENTIMENT_TASK};
use quill_core::schema::{parse_task_file, ResultValue, Span};
use quill_core::store::*;
use serde_json::Value;

const MIN: u64 = 60_000;

struct World {
    store: Store,
    clock: ManualClock,
    admin: String,
    alice: String,
    bob: String,
}

fn world_with(storage: Box<dyn Storage>) -> World {
    let clock = ManualClock::new(1_700_000_000_000);
    let store = Store::with_clock(storage, Arc::new(clock.clone()));
    let admin = store.register("admin", Role::Administrator, Default::default()).unwrap().user_id;
    let alice = store.register("alice", Role::Annotator, Default::default()).unwrap().user_id;
    let bob = store.register("bob", Role::Annotator, Default::default()).unwrap().user_id;
    World { store, clock, admin, alice, bob }
}

fn world() -> World {
    world_with(Box::new(MemoryStorage::default()))
}

fn sentiment_task(w: &World) -> String {
    let id = w.store.import_file(&w.admin, parse_task_file(SENTIMENT_TASK).unwrap()).unwrap();
    w.store.assign(&w.admin, &id, &w.alice).unwrap();
    w.store.assign(&w.admin, &id, &w.bob).unwrap();
    id
}

fn choice(a: usize, b: usize) -> Vec<ResultValue> {
    vec![ResultValue::Choice(a), ResultValue::Choice(b)]
}

fn submit(index: usize, results: Vec<ResultValue>) -> Submission {
    Submission { instance_index: index, results, ..Default::default() }
}

#[test]
fn created_task_keeps_uploaded_done_flags() {
    let w = world();
    let id = sentiment_task(&w);
    assert_eq!(w.store.task(&id).unwrap().document.done, vec![0, 0, 0]);
}

#[test]
fn annotators_cannot_create_tasks() {
    let w = world();
    let file = parse_task_file(SENTIMENT_TASK).unwrap();
    assert_eq!(w.store.import_file(&w.alice, file), Err(StoreError::PermissionDenied));
}

#[test]
fn invalid_documents_are_rejected_with_violations() {
    let w = world();
    let mut file = parse_task_file(SENTIMENT_TASK).unwrap();
    file.data.done.pop();
    match w.store.import_file(&w.admin, file) {
        Err(StoreError::ValidationFailed(v)) => assert!(!v.is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn assignment_is_idempotent_and_annotator_only() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.assign(&w.admin, &id, &w.bob).unwrap();
    assert_eq!(w.store.task(&id).unwrap().assignees, BTreeSet::from([w.alice.clone(), w.bob.clone()]));
    assert_eq!(w.store.assign(&w.admin, &id, &w.admin), Err(StoreError::RoleMismatch));
    assert_eq!(w.store.assign(&w.admin, "task-99", &w.bob), Err(StoreError::UnknownTask("task-99".into())));
    assert_eq!(w.store.assign(&w.admin, &id, "u99"), Err(StoreError::UnknownUser("u99".into())));
    let bob_tasks = w.store.tasks_for(&w.bob).unwrap();
    assert_eq!(bob_tasks.len(), 1);
    assert_eq!(bob_tasks[0].task_id, id);
}

#[test]
fn instances_are_served_lowest_first_until_done() {
    let w = world();
    let id = sentiment_task(&w);
    for i in 0..3 {
        let next = w.store.next_instance(&id, &w.alice).unwrap().unwrap();
        assert_eq!(next.instance_index, i);
        w.store.submit_annotation(&id, &w.alice, submit(i, choice(0, 1))).unwrap();
    }
    assert_eq!(w.store.next_instance(&id, &w.alice).unwrap(), None);
    let carol = w.store.register("carol", Role::Annotator, Default::default()).unwrap();
    assert_eq!(w.store.next_instance(&id, &carol.user_id), Err(StoreError::NotAssigned));
}

#[test]
fn bad_arity_leaves_document_untouched() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.next_instance(&id, &w.alice).unwrap();
    let err = w.store.submit_annotation(&id, &w.alice, submit(0, vec![ResultValue::Choice(0)])).unwrap_err();
    assert!(matches!(err, StoreError::InvalidSubmission(_)));
    assert_eq!(w.store.task(&id).unwrap().document.done, vec![0, 0, 0]);
    assert!(w.store.records(&id).unwrap().is_empty());
}

#[test]
fn leases_keep_annotators_apart_until_they_expire() {
    let w = world();
    let id = sentiment_task(&w);
    assert_eq!(w.store.next_instance(&id, &w.alice).unwrap().unwrap().instance_index, 0);
    assert_eq!(w.store.next_instance(&id, &w.bob).unwrap().unwrap().instance_index, 1);
    assert_eq!(w.store.next_instance(&id, &w.alice).unwrap().unwrap().instance_index, 0);
    assert_eq!(w.store.submit_annotation(&id, &w.bob, submit(0, choice(0, 0))), Err(StoreError::LeaseHeld(0)));

    w.clock.advance(31 * MIN);
    assert_eq!(w.store.next_instance(&id, &w.bob).unwrap().unwrap().instance_index, 0);
    assert_eq!(w.store.submit_annotation(&id, &w.alice, submit(0, choice(1, 1))), Err(StoreError::LeaseExpired(0)));
    w.store.submit_annotation(&id, &w.bob, submit(0, choice(2, 2))).unwrap();
    assert_eq!(w.store.submit_annotation(&id, &w.alice, submit(0, choice(1, 1))), Err(StoreError::AlreadyDone(0)));
    assert_eq!(w.store.next_instance(&id, &w.alice).unwrap().unwrap().instance_index, 1);
    w.store.submit_annotation(&id, &w.alice, submit(1, choice(1, 1))).unwrap();
}

#[test]
fn admin_override_supersedes_without_deleting_history() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.next_instance(&id, &w.alice).unwrap();
    w.store.submit_annotation(&id, &w.alice, submit(0, choice(0, 3))).unwrap();
    let over = w.store.submit_annotation(&id, &w.admin, submit(0, choice(2, 4))).unwrap();
    assert_eq!(over.record.supersedes, Some(1));
    assert_eq!(w.store.records(&id).unwrap().len(), 2);
    let latest = w.store.latest_records(&id).unwrap();
    assert_eq!(latest.len(), 1);
    assert_eq!(latest[0].results, choice(2, 4));
    assert_eq!(w.store.task(&id).unwrap().document.result[0], choice(2, 4));
}

#[test]
fn idempotency_key_replays_yield_one_record() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.next_instance(&id, &w.alice).unwrap();
    let mut s = submit(0, choice(0, 1));
    s.idempotency_key = Some("k-1".into());
    let first = w.store.submit_annotation(&id, &w.alice, s.clone()).unwrap();
    let again = w.store.submit_annotation(&id, &w.alice, s).unwrap();
    assert!(!first.replayed && again.replayed);
    assert_eq!(first.record, again.record);
    assert_eq!(w.store.records(&id).unwrap().len(), 1);
    assert_eq!(w.store.task(&id).unwrap().submissions, 1);
}

#[test]
fn durations_are_submit_minus_serve() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.next_instance(&id, &w.alice).unwrap();
    w.clock.advance(4_321);
    let rec = w.store.submit_annotation(&id, &w.alice, submit(0, choice(0, 1))).unwrap().record;
    assert_eq!(rec.duration_ms, Some(4_321));
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn unannotated_export_is_the_upload() {
    for fixture in [CUSTOM_TASK, SENTIMENT_TASK] {
        let w = world();
        let id = w.store.import_file(&w.admin, parse_task_file(fixture).unwrap()).unwrap();
        let mut exported = serde_json::to_value(w.store.export(&id).unwrap()).unwrap();
        assert_eq!(exported.as_object_mut().unwrap().remove("records"), Some(Value::Array(vec![])));
        assert_eq!(exported, json(fixture));
    }
}

#[test]
fn sentiment_round_trip() {
    let w = world();
    let id = sentiment_task(&w);
    for i in 0..3 {
        let who = if i % 2 == 0 { &w.alice } else { &w.bob };
        let n = w.store.next_instance(&id, who).unwrap().unwrap();
        w.store.submit_annotation(&id, who, submit(n.instance_index, choice(i, 6 - i))).unwrap();
    }
    let export = w.store.export(&id).unwrap();
    assert_eq!(export.data.done, vec![1, 1, 1]);
    let choices = export.data.result.iter().flatten().filter(|v| matches!(v, ResultValue::Choice(_))).count();
    assert_eq!(choices, 6);

    let text = serde_json::to_string_pretty(&export).unwrap();
    let again_id = w.store.import(&w.admin, serde_json::from_str(&text).unwrap(), BackendKind::None, Value::Null).unwrap();
    assert_eq!(serde_json::to_string_pretty(&w.store.export(&again_id).unwrap()).unwrap(), text);
}

#[test]
fn custom_task_accepts_spans_and_text() {
    let w = world();
    let id = w.store.import_file(&w.admin, parse_task_file(CUSTOM_TASK).unwrap()).unwrap();
    w.store.assign(&w.admin, &id, &w.alice).unwrap();
    w.store.next_instance(&id, &w.alice).unwrap();
    let results = vec![
        ResultValue::Spans(vec![Span::new(4, 8)]),
        ResultValue::Text("combustion chamber".into()),
        ResultValue::Choice(2),
        ResultValue::Spans(vec![Span::labeled(0, 3, "NP")]),
        ResultValue::Text("锅炉".into()),
    ];
    w.store.submit_annotation(&id, &w.alice, submit(0, results)).unwrap();
    let bad = vec![
        ResultValue::Spans(vec![Span::labeled(0, 3, "XX")]),
        ResultValue::Text(String::new()),
        ResultValue::Choice(0),
        ResultValue::Spans(vec![]),
        ResultValue::Text(String::new()),
    ];
    w.store.next_instance(&id, &w.alice).unwrap();
    assert!(matches!(w.store.submit_annotation(&id, &w.alice, submit(1, bad)), Err(StoreError::InvalidSubmission(_))));
}

#[test]
fn shared_policy_serves_every_instance_to_every_annotator() {
    let w = world();
    let file = parse_task_file(SENTIMENT_TASK).unwrap();
    let new = NewTask {
        name: "poems".into(),
        interface: file.format,
        document: file.data,
        backend: BackendKind::None,
        backend_config: Value::Null,
        policy: AssignmentPolicy::Shared,
    };
    let id = w.store.create_task(&w.admin, new).unwrap();
    w.store.assign(&w.admin, &id, &w.alice).unwrap();
    w.store.assign(&w.admin, &id, &w.bob).unwrap();
    for who in [&w.alice, &w.bob] {
        for i in 0..3 {
            assert_eq!(w.store.next_instance(&id, who).unwrap().unwrap().instance_index, i);
            w.store.submit_annotation(&id, who, submit(i, choice(0, i))).unwrap();
        }
        assert_eq!(w.store.next_instance(&id, who).unwrap(), None);
    }
    let matrix = w.store.label_matrix(&id).unwrap();
    assert!(matrix.values().all(|per| per.len() == 2));
    assert_eq!(w.store.latest_records(&id).unwrap().len(), 6);
}

#[test]
fn records_export_as_ndjson() {
    let w = world();
    let id = sentiment_task(&w);
    w.store.next_instance(&id, &w.alice).unwrap();
    w.store.submit_annotation(&id, &w.alice, submit(0, choice(0, 1))).unwrap();
    w.store.next_instance(&id, &w.alice).unwrap();
    w.store.submit_annotation(&id, &w.alice, submit(1, choice(1, 1))).unwrap();
    let text = w.store.export_records_ndjson(&id).unwrap();
    let lines: Vec<RecordLine> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.task_id == id));
    assert_eq!(lines[1].record.seq, 2);
}

#[test]
fn sqlite_state_survives_reopening() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("quill.db");
    let id;
    let before;
    {
        let w = world_with(Box::new(SqliteStorage::open(&path).unwrap()));
        id = sentiment_task(&w);
        w.store.next_instance(&id, &w.alice).unwrap();
        w.store.submit_annotation(&id, &w.alice, submit(0, choice(2, 5))).unwrap();
        before = w.store.export(&id).unwrap();
    }
    let store = Store::new(Box::new(SqliteStorage::open(&path).unwrap()));
    assert_eq!(store.export(&id).unwrap(), before);
    assert_eq!(store.user_by_name("bob").unwrap().role, Role::Annotator);
    assert_eq!(store.register("bob", Role::Annotator, Default::default()), Err(StoreError::DuplicateUser("bob".into())));
}

#[derive(Debug, Clone)]
enum Op {
    Next(usize),
    Submit(usize, usize),
    Advance(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..3usize).prop_map(Op::Next),
        (0..3usize, 0..3usize).prop_map(|(u, i)| Op::Submit(u, i)),
        (0..40u64).prop_map(|m| Op::Advance(m * MIN)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leases_are_exclusive_and_done_tracks_annotations(ops in prop::collection::vec(op(), 1..60)) {
        let w = world();
        let carol = w.store.register("carol", Role::Annotator, Default::default()).unwrap().user_id;
        let id = sentiment_task(&w);
        w.store.assign(&w.admin, &id, &carol).unwrap();
        let users = [w.alice.clone(), w.bob.clone(), carol];
        for op in ops {
            match op {
                Op::Next(u) => { w.store.next_instance(&id, &users[u]).unwrap(); }
                Op::Submit(u, i) => { let _ = w.store.submit_annotation(&id, &users[u], submit(i, choice(0, 0))); }
                Op::Advance(ms) => w.clock.advance(ms),
            }
            for i in 0..3 {
                prop_assert!(w.store.lease_holders(&id, i).len() <= 1);
            }
            let task = w.store.task(&id).unwrap();
            let annotated: HashSet<usize> = w.store.records(&id).unwrap().iter().map(|r| r.instance_index).collect();
            prop_assert_eq!(task.document.done_count(), annotated.len());
        }
    }
}
