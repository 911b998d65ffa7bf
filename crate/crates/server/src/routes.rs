use axum::extract::{FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use quill_core::schema::{empty_result_for, fixtures, validate_task_document, InterfaceSpec, TaskFile};
use quill_core::store::{AnnotationRecord, NewTask, Role, StoreError, Submission, TaskSummary, User};
use serde::Deserialize;
use serde_json::Value;

use crate::api::*;
use crate::error::ApiError;
use crate::state::{spawn_retrain, AppState};

/// The caller behind a bearer token.
pub struct Caller(pub Session);

impl Caller {
    fn admin(&self) -> Result<&Session, ApiError> {
        match self.0.role {
            Role::Administrator => Ok(&self.0),
            Role::Annotator => Err(ApiError::forbidden("administrator role required")),
        }
    }

    fn annotator(&self) -> Result<&Session, ApiError> {
        match self.0.role {
            Role::Annotator => Ok(&self.0),
            Role::Administrator => Err(ApiError::forbidden("annotator role required")),
        }
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        let token = header.strip_prefix("Bearer ").ok_or_else(|| ApiError::unauthorized("expected `Bearer <token>`"))?;
        Ok(Caller(state.session(token.trim())?))
    }
}

/// JSON body whose parse errors come back as problem details.
pub struct Body<T>(pub T);

impl<T: serde::de::DeserializeOwned, S: Send + Sync> axum::extract::FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<Value>::from_request(req, state)
            .await
            .map_err(|e| ApiError::unprocessable("malformed_document", e.body_text()))?;
        serde_json::from_value(v).map(Body).map_err(|e| ApiError::unprocessable("malformed_document", e.to_string()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/login", post(login))
        .route("/users", get(list_users).post(create_user))
        .route("/users/{id}/password", post(reset_password))
        .route("/interfaces", get(list_interfaces))
        .route("/interfaces/{name}", get(get_interface))
        .route("/schema/validate", post(validate))
        .route("/tasks", get(list_tasks).post(create_task))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/assign", post(assign))
        .route("/tasks/{id}/next", get(next))
        .route("/tasks/{id}/annotations", post(submit))
        .route("/tasks/{id}/export", get(export))
        .route("/tasks/{id}/records", get(records))
        .route("/tasks/{id}/backend", get(backend_status).put(update_backend))
        .with_state(state)
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

async fn login(State(state): State<AppState>, Body(req): Body<LoginRequest>) -> Result<Json<Session>, ApiError> {
    Ok(Json(state.login(&req.name, &req.password)?))
}

async fn list_users(State(state): State<AppState>, caller: Caller) -> Result<Json<UserList>, ApiError> {
    caller.admin()?;
    Ok(Json(UserList { users: state.store().users()? }))
}

async fn create_user(State(state): State<AppState>, caller: Caller, Body(req): Body<NewUser>) -> Result<(StatusCode, Json<User>), ApiError> {
    caller.admin()?;
    if req.password.is_empty() || req.name.trim().is_empty() {
        return Err(ApiError::unprocessable("invalid_user", "name and password must not be empty"));
    }
    let user = state.store().register(&req.name, req.role, req.demographics)?;
    state.set_password(&user.user_id, &req.password)?;
    Ok((StatusCode::CREATED, Json(user)))
}

async fn reset_password(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<PasswordReset>,
) -> Result<StatusCode, ApiError> {
    caller.admin()?;
    state.store().user(&id)?;
    state.set_password(&id, &req.password)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_interfaces(_caller: Caller) -> Json<InterfaceList> {
    Json(InterfaceList { interfaces: fixtures::PREDEFINED.iter().map(|(n, _)| n.to_string()).collect() })
}

async fn get_interface(_caller: Caller, Path(name): Path<String>) -> Result<Json<InterfaceSpec>, ApiError> {
    fixtures::predefined_interface(&name)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_interface", format!("no predefined interface `{name}`")))
}

/// Accepts `{format}` alone or a whole task file `{data, format}`.
async fn validate(_caller: Caller, Body(raw): Body<Value>) -> Result<Json<ValidationReport>, ApiError> {
    let spec = InterfaceSpec::from_value(&raw)?;
    let violations = match raw.get("data") {
        Some(_) => {
            let file = TaskFile::from_value(&raw)?;
            validate_task_document(&file.data, &spec)
        }
        None => Vec::new(),
    };
    Ok(Json(ValidationReport { valid: violations.is_empty(), violations }))
}

#[derive(Deserialize)]
struct CreateOptions {
    #[serde(default)]
    name: String,
    #[serde(default)]
    backend: quill_core::store::BackendKind,
    #[serde(default)]
    backend_config: Value,
    #[serde(default)]
    policy: quill_core::store::AssignmentPolicy,
    #[serde(default)]
    records: Vec<AnnotationRecord>,
    #[serde(default)]
    assignees: Vec<String>,
    /// Name of a predefined interface used when `format` is absent.
    #[serde(default)]
    interface: Option<String>,
}

/// Body: a task file (`data` + `format`, optionally `records` from an
/// earlier export) plus back-end options. `interface` names a predefined
/// spec in place of `format`.
async fn create_task(State(state): State<AppState>, caller: Caller, Body(mut raw): Body<Value>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let admin = caller.admin()?.user_id.clone();
    let opts: CreateOptions =
        serde_json::from_value(raw.clone()).map_err(|e| ApiError::unprocessable("malformed_document", e.to_string()))?;
    if raw.get("format").is_none() {
        if let Some(name) = &opts.interface {
            let spec = fixtures::predefined_interface(name)
                .ok_or_else(|| ApiError::unprocessable("unknown_interface", format!("no predefined interface `{name}`")))?;
            raw["format"] = spec.to_value();
        }
    }
    let file = TaskFile::from_value(&raw)?;
    let assignees = opts
        .assignees
        .iter()
        .map(|a| resolve_user(&state, a))
        .collect::<Result<Vec<_>, _>>()?;
    let new = NewTask {
        name: opts.name,
        interface: file.format,
        document: file.data,
        backend: opts.backend,
        backend_config: opts.backend_config,
        policy: opts.policy,
    };
    let probe = quill_core::store::Task {
        task_id: String::new(),
        name: String::new(),
        interface: new.interface.clone(),
        document: new.document.clone(),
        assignees: Default::default(),
        backend: new.backend,
        backend_config: new.backend_config.clone(),
        policy: new.policy,
        created_by: String::new(),
        created_at: 0,
        submissions: 0,
    };
    quill_core::bridge::build_backend(&probe)?;
    let task_id = state.store().create_with_records(&admin, new, opts.records)?;
    for user in assignees {
        state.store().assign(&admin, &task_id, &user.user_id)?;
    }
    Ok((StatusCode::CREATED, Json(Created { task_id })))
}

fn resolve_user(state: &AppState, name_or_id: &str) -> Result<User, ApiError> {
    match state.store().user_by_name(name_or_id) {
        Ok(u) => Ok(u),
        Err(StoreError::UnknownUser(_)) => Ok(state.store().user(name_or_id)?),
        Err(e) => Err(e.into()),
    }
}

/// Administrators see every task; annotators see their assignments.
async fn list_tasks(State(state): State<AppState>, caller: Caller) -> Result<Json<TaskList>, ApiError> {
    Ok(Json(TaskList { tasks: state.store().tasks_for(&caller.0.user_id)? }))
}

async fn get_task(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> Result<Json<TaskSummary>, ApiError> {
    let task = state.store().task(&id)?;
    if caller.0.role == Role::Annotator && !task.assignees.contains(&caller.0.user_id) {
        return Err(StoreError::NotAssigned.into());
    }
    Ok(Json(TaskSummary::from(&task)))
}

async fn assign(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<AssignRequest>,
) -> Result<Json<Assigned>, ApiError> {
    let admin = caller.admin()?.user_id.clone();
    let user = resolve_user(&state, &req.annotator)?;
    state.store().assign(&admin, &id, &user.user_id)?;
    Ok(Json(Assigned { task_id: id.clone(), assignees: state.store().task(&id)?.assignees }))
}

async fn next(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    let user_id = caller.annotator()?.user_id.clone();
    let Some(served) = state.store().next_instance(&id, &user_id)? else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let task = state.store().task(&id)?;
    let user = state.store().user(&user_id)?;
    let backend = state.backend(&id)?;
    let index = served.instance_index;
    let suggestion = tokio::task::spawn_blocking(move || backend.suggest(&task, index, &user))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .unwrap_or_else(|e| {
            log::warn!("suggestion for {id}#{index} failed: {e}");
            None
        });
    let results = match &suggestion {
        Some(s) => s.results.clone(),
        None => state.store().task(&id)?.interface.components().iter().map(empty_result_for).collect(),
    };
    let body = NextResponse {
        task_id: id,
        instance_index: served.instance_index,
        source: served.source,
        question: served.question,
        results,
        suggestion,
        served_at: served.served_at,
        lease_expires_at: served.lease_expires_at,
    };
    Ok(Json(body).into_response())
}

/// Annotators submit their leased instances; administrators may submit
/// corrections, which supersede earlier records.
async fn submit(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(mut submission): Body<Submission>,
) -> Result<Json<SubmitResponse>, ApiError> {
    if let Some(key) = headers.get("idempotency-key").and_then(|v| v.to_str().ok()) {
        submission.idempotency_key = Some(key.to_string());
    }
    let user_id = caller.0.user_id.clone();
    let outcome = state.store().submit_annotation(&id, &user_id, submission)?;
    let mut retrain_scheduled = false;
    if !outcome.replayed {
        let backend = state.backend(&id)?;
        let task = state.store().task(&id)?;
        let user = state.store().user(&user_id)?;
        if let Err(e) = backend.observe(&task, &outcome.record, &user) {
            log::warn!("back-end could not learn from {id}#{}: {e}", outcome.record.instance_index);
        }
        if backend.wants_retrain(outcome.submissions) {
            spawn_retrain(backend);
            retrain_scheduled = true;
        }
    }
    Ok(Json(SubmitResponse { record: outcome.record, replayed: outcome.replayed, submissions: outcome.submissions, retrain_scheduled }))
}

async fn export(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> Result<Json<quill_core::store::ExportDocument>, ApiError> {
    caller.admin()?;
    Ok(Json(state.store().export(&id)?))
}

async fn records(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    caller.admin()?;
    let body = state.store().export_records_ndjson(&id)?;
    Ok(([("content-type", "application/x-ndjson")], body).into_response())
}

async fn backend_status(State(state): State<AppState>, caller: Caller, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    caller.admin()?;
    Ok(Json(state.backend(&id)?.status()))
}

async fn update_backend(
    State(state): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<BackendUpdate>,
) -> Result<Json<Value>, ApiError> {
    let admin = caller.admin()?.user_id.clone();
    let mut probe = state.store().task(&id)?;
    probe.backend = req.backend;
    probe.backend_config = req.backend_config.clone();
    quill_core::bridge::build_backend(&probe)?;
    state.store().update_backend(&admin, &id, req.backend, req.backend_config)?;
    state.reset_backend(&id);
    Ok(Json(state.backend(&id)?.status()))
}
