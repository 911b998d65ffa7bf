use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use quill_core::bridge::{build_backend, SuggestionBackend};
use quill_core::demographic::DemographicProfile;
use quill_core::store::{Role, Store, StoreError, User};
use rand::Rng;

use crate::api::Session;
use crate::error::ApiError;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub session_ttl_ms: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { session_ttl_ms: 12 * 60 * 60 * 1000 }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Shared>,
}

pub(crate) struct Shared {
    pub store: Arc<Store>,
    pub config: ServerConfig,
    sessions: RwLock<HashMap<String, Session>>,
    /// Passwords by user id; held in memory only.
    credentials: RwLock<HashMap<String, String>>,
    backends: Mutex<HashMap<String, Arc<dyn SuggestionBackend>>>,
}

impl AppState {
    pub fn new(store: Arc<Store>, config: ServerConfig) -> Self {
        Self {
            inner: Arc::new(Shared {
                store,
                config,
                sessions: RwLock::default(),
                credentials: RwLock::default(),
                backends: Mutex::default(),
            }),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    /// Registers `name` as an administrator unless present and sets the
    /// password. Returns the user.
    pub fn bootstrap_admin(&self, name: &str, password: &str) -> Result<User, ApiError> {
        let user = match self.store().user_by_name(name) {
            Ok(u) if u.role == Role::Administrator => u,
            Ok(_) => return Err(ApiError::unprocessable("role_mismatch", format!("`{name}` exists and is not an administrator"))),
            Err(StoreError::UnknownUser(_)) => self.store().register(name, Role::Administrator, DemographicProfile::new())?,
            Err(e) => return Err(e.into()),
        };
        self.set_password(&user.user_id, password)?;
        Ok(user)
    }

    pub fn set_password(&self, user_id: &str, password: &str) -> Result<(), ApiError> {
        if password.is_empty() {
            return Err(ApiError::unprocessable("empty_password", "password must not be empty"));
        }
        self.inner.credentials.write().expect("credentials poisoned").insert(user_id.to_string(), password.to_string());
        Ok(())
    }

    pub fn login(&self, name: &str, password: &str) -> Result<Session, ApiError> {
        let user = self.store().user_by_name(name).map_err(|_| ApiError::unauthorized("unknown name or wrong password"))?;
        let ok = self.inner.credentials.read().expect("credentials poisoned").get(&user.user_id).is_some_and(|p| p == password);
        if !ok || password.is_empty() {
            return Err(ApiError::unauthorized("unknown name or wrong password"));
        }
        let token: String = {
            let mut rng = rand::rng();
            (0..4).map(|_| format!("{:016x}", rng.random::<u64>())).collect()
        };
        let now = self.store().now_ms();
        let session = Session {
            token: token.clone(),
            user_id: user.user_id,
            role: user.role,
            issued_at: now,
            expires_at: now + self.inner.config.session_ttl_ms,
        };
        self.inner.sessions.write().expect("sessions poisoned").insert(token, session.clone());
        Ok(session)
    }

    /// The live session for a bearer token.
    pub fn session(&self, token: &str) -> Result<Session, ApiError> {
        let now = self.store().now_ms();
        let mut sessions = self.inner.sessions.write().expect("sessions poisoned");
        match sessions.get(token) {
            Some(s) if s.expires_at > now => Ok(s.clone()),
            Some(_) => {
                sessions.remove(token);
                Err(ApiError::unauthorized("session expired"))
            }
            None => Err(ApiError::unauthorized("unknown session token")),
        }
    }

    /// The task's suggestion back-end, built on first use and fed every
    /// stored submission. A back-end with data but no model is trained in
    /// the background.
    pub fn backend(&self, task_id: &str) -> Result<Arc<dyn SuggestionBackend>, ApiError> {
        if let Some(b) = self.inner.backends.lock().expect("backends poisoned").get(task_id) {
            return Ok(b.clone());
        }
        let task = self.store().task(task_id)?;
        let backend = build_backend(&task)?;
        let records = self.store().latest_records(task_id)?;
        for record in &records {
            let user = self.store().user(&record.annotator_id)?;
            backend.observe(&task, record, &user)?;
        }
        let backend = {
            let mut map = self.inner.backends.lock().expect("backends poisoned");
            map.entry(task_id.to_string()).or_insert(backend).clone()
        };
        if !records.is_empty() && backend.snapshot_id() == 0 {
            spawn_retrain(backend.clone());
        }
        Ok(backend)
    }

    /// Drops the cached back-end so the next use rebuilds it from config.
    pub fn reset_backend(&self, task_id: &str) {
        self.inner.backends.lock().expect("backends poisoned").remove(task_id);
    }
}

/// Runs `retrain` on a blocking thread when inside a runtime, inline
/// otherwise.
pub(crate) fn spawn_retrain(backend: Arc<dyn SuggestionBackend>) {
    let job = move || match backend.retrain() {
        Ok(id) => log::info!("retrained {:?} back-end, snapshot {id}", backend.kind()),
        Err(e) => log::warn!("retraining failed: {e}"),
    };
    match tokio::runtime::Handle::try_current() {
        Ok(handle) => {
            handle.spawn_blocking(job);
        }
        Err(_) => job(),
    }
}
