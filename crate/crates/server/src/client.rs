use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use crate::{router, AppState};

/// Drives the router in-process, without a socket.
#[derive(Clone)]
pub struct LocalClient {
    router: Router,
}

/// A response with its body parsed as JSON (`Null` when empty,
/// a string when not JSON).
#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Value,
    pub raw: String,
}

impl LocalClient {
    pub fn new(state: AppState) -> Self {
        Self { router: router(state) }
    }

    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<&Value>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .expect("request parts are valid");
        let resp = self.router.clone().oneshot(req).await.expect("router is infallible");
        let status = resp.status();
        let content_type = resp.headers().get("content-type").and_then(|v| v.to_str().ok()).map(str::to_string);
        let bytes = resp.into_body().collect().await.map(|b| b.to_bytes()).unwrap_or_default();
        let raw = String::from_utf8_lossy(&bytes).into_owned();
        let body = if raw.is_empty() { Value::Null } else { serde_json::from_str(&raw).unwrap_or_else(|_| Value::String(raw.clone())) };
        Reply { status, content_type, body, raw }
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.call(Method::GET, path, Some(token), None, &[]).await
    }

    pub async fn post(&self, path: &str, token: &str, body: &Value) -> Reply {
        self.call(Method::POST, path, Some(token), Some(body), &[]).await
    }

    pub async fn put(&self, path: &str, token: &str, body: &Value) -> Reply {
        self.call(Method::PUT, path, Some(token), Some(body), &[]).await
    }

    /// Logs in and returns the bearer token.
    pub async fn login(&self, name: &str, password: &str) -> Result<String, Reply> {
        let r = self.call(Method::POST, "/login", None, Some(&serde_json::json!({"name": name, "password": password})), &[]).await;
        match (r.status, r.body.get("token").and_then(Value::as_str)) {
            (StatusCode::OK, Some(t)) => Ok(t.to_string()),
            _ => Err(r),
        }
    }
}
