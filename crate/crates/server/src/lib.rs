//! HTTP API over the quill store and suggestion back-ends.
//!
//! Bearer sessions come from `POST /login`. Errors are problem-details
//! JSON with a stable `code`. Retraining runs on blocking threads and
//! publishes snapshots atomically, so `GET /tasks/{id}/next` never waits
//! on training.

pub mod api;
mod client;
mod error;
mod routes;
mod state;

use std::net::SocketAddr;

pub use client::{LocalClient, Reply};
pub use error::{ApiError, Problem};
pub use routes::router;
pub use state::{AppState, ServerConfig};

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
