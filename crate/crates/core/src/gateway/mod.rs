//! HTTP binding: every service operation behind a JSON envelope.
//!
//! Responses look like `{"status":"ok","data":...,"pagination":...}` or
//! `{"status":"error","error":{"code":...,"message":...}}`. The session token
//! travels as `Authorization: Bearer <token>` or the `uuis_session` cookie
//! that `/api/login` sets. Listing routes take `?page=<0-based>&size=<n>`;
//! exportable ones take `?format=csv|printable` and answer with the document.

mod envelope;
mod handlers;

use std::future::Future;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post, put};
use axum::Router;
use tokio::net::TcpListener;

pub use envelope::{ApiError, ErrorBody, Pagination, Reply, SESSION_COOKIE};

use crate::service::Uuis;
use handlers as h;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    /// Reachable without a session.
    pub public: bool,
}

const fn r(method: &'static str, path: &'static str) -> Route {
    Route { method, path, public: false }
}

/// Every route the router serves.
pub const ROUTES: &[Route] = &[
    Route { method: "POST", path: "/api/login", public: true },
    r("POST", "/api/logout"),
    r("POST", "/api/password"),
    r("GET", "/api/profile"),
    r("PATCH", "/api/profile"),
    r("POST", "/api/search/basic"),
    r("POST", "/api/search/advanced"),
    r("GET", "/api/assets"),
    r("POST", "/api/assets"),
    r("PATCH", "/api/assets"),
    r("GET", "/api/assets/categories"),
    r("POST", "/api/assets/import"),
    r("POST", "/api/assets/group"),
    r("GET", "/api/assets/{id}"),
    r("PATCH", "/api/assets/{id}"),
    r("GET", "/api/requests"),
    r("POST", "/api/requests"),
    r("GET", "/api/requests/types"),
    r("GET", "/api/requests/pending"),
    r("GET", "/api/requests/{id}"),
    r("POST", "/api/requests/{id}/approve"),
    r("POST", "/api/requests/{id}/reject"),
    r("POST", "/api/requests/{id}/cancel"),
    r("GET", "/api/admin/affiliations"),
    r("POST", "/api/admin/departments"),
    r("POST", "/api/admin/faculties"),
    r("GET", "/api/admin/locations"),
    r("POST", "/api/admin/locations"),
    r("POST", "/api/admin/properties"),
    r("POST", "/api/admin/users/import"),
    r("PUT", "/api/admin/users/{id}/role"),
    r("GET", "/api/admin/backup"),
    r("POST", "/api/admin/backup"),
    r("GET", "/api/review/options"),
    r("POST", "/api/review/logs"),
    r("POST", "/api/review/reports"),
    r("GET", "/api/errors"),
    r("POST", "/api/errors/print"),
    r("GET", "/api/errors/{id}"),
    r("POST", "/api/errors/{id}/annotations"),
];

pub fn router(uuis: Uuis) -> Router {
    Router::new()
        .route("/api/login", post(h::login))
        .route("/api/logout", post(h::logout))
        .route("/api/password", post(h::password))
        .route("/api/profile", get(h::profile).patch(h::update_profile))
        .route("/api/search/basic", post(h::search_basic))
        .route("/api/search/advanced", post(h::search_advanced))
        .route("/api/assets", get(h::list_assets).post(h::add_asset).patch(h::update_assets))
        .route("/api/assets/categories", get(h::categories))
        .route("/api/assets/import", post(h::import_assets))
        .route("/api/assets/group", post(h::group_assets))
        .route("/api/assets/{id}", get(h::get_asset).patch(h::update_asset))
        .route("/api/requests", get(h::own_requests).post(h::submit_request))
        .route("/api/requests/types", get(h::request_types))
        .route("/api/requests/pending", get(h::pending_requests))
        .route("/api/requests/{id}", get(h::get_request))
        .route("/api/requests/{id}/approve", post(h::approve_request))
        .route("/api/requests/{id}/reject", post(h::reject_request))
        .route("/api/requests/{id}/cancel", post(h::cancel_request))
        .route("/api/admin/affiliations", get(h::affiliations))
        .route("/api/admin/departments", post(h::create_department))
        .route("/api/admin/faculties", post(h::create_faculty))
        .route("/api/admin/locations", get(h::locations).post(h::add_location))
        .route("/api/admin/properties", post(h::define_property))
        .route("/api/admin/users/import", post(h::import_users))
        .route("/api/admin/users/{id}/role", put(h::update_role))
        .route("/api/admin/backup", get(h::list_backups).post(h::trigger_backup))
        .route("/api/review/options", get(h::review_options))
        .route("/api/review/logs", post(h::review_logs))
        .route("/api/review/reports", post(h::review_reports))
        .route("/api/errors", get(h::list_errors))
        .route("/api/errors/print", post(h::print_errors))
        .route("/api/errors/{id}", get(h::get_error))
        .route("/api/errors/{id}/annotations", post(h::annotate_error))
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async { ApiError::bad_request("method not allowed on this route") })
        // Bodies are capped by the payload extractor so oversize uploads get an envelope.
        .layer(DefaultBodyLimit::disable())
        .with_state(uuis)
}

/// Serves until `shutdown` resolves.
pub async fn serve(uuis: Uuis, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(uuis)).with_graceful_shutdown(shutdown).await
}
