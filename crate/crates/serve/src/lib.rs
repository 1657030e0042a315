// SPDX-License-Identifier: Apache-2.0

//! Read-only HTTP API over a [`StaticBundle`].
//!
//! | route | body |
//! |---|---|
//! | `GET /manifest` | [`BundleManifest`](cgaps_core::export::BundleManifest) |
//! | `GET /concepts` | [`ConceptPage`] of rows matching the query |
//! | `GET /concepts/{id}` | [`ConceptDetail`](cgaps_core::export::ConceptDetail), 404 if unknown |
//! | `GET /benchmarks` | [`BenchmarksDocument`](cgaps_core::export::BenchmarksDocument) |
//! | `GET /distributions` | [`Distributions`](cgaps_core::export::Distributions) |
//! | `GET /overlap` | [`OverlapMatrix`](cgaps_core::metrics::OverlapMatrix) |
//!
//! `/concepts` takes `query` (case-insensitive label substring), `class`,
//! `gap` (`true`/`false`), `sort` (`id`, `x_bench`, `x_model`), `dir`
//! (`asc`, `desc`) and a zero-based `page`. Pages hold the bundle's
//! `page_size` rows, so the unfiltered listing sorted by id returns exactly
//! the bundle's page files. Undefined `x_model` sorts last in either
//! direction. Errors are `{"error": "..."}`.

use std::cmp::Ordering;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use cgaps_core::export::{ConceptPage, ConceptRow, StaticBundle};
use cgaps_core::CoverageClass;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    Id,
    XBench,
    XModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortDir {
    #[default]
    Asc,
    Desc,
}

/// Query string of `GET /concepts`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConceptQuery {
    pub query: Option<String>,
    pub class: Option<String>,
    pub gap: Option<bool>,
    pub sort: SortKey,
    pub dir: SortDir,
    pub page: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadRequest(pub String);

fn compare(a: &ConceptRow, b: &ConceptRow, key: SortKey, dir: SortDir) -> Ordering {
    let flip = |o: Ordering| if dir == SortDir::Desc { o.reverse() } else { o };
    let primary = match key {
        SortKey::Id => flip(a.id.cmp(&b.id)),
        SortKey::XBench => flip(a.x_bench.total_cmp(&b.x_bench)),
        SortKey::XModel => match (a.x_model, b.x_model) {
            (Some(x), Some(y)) => flip(x.total_cmp(&y)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        },
    };
    primary.then(a.id.cmp(&b.id))
}

/// Filters, sorts and pages the bundle's rows.
pub fn query_concepts(bundle: &StaticBundle, q: &ConceptQuery) -> Result<ConceptPage, BadRequest> {
    let class = q
        .class
        .as_deref()
        .filter(|s| !s.is_empty())
        .map(|s| CoverageClass::from_str(s).map_err(|_| BadRequest(format!("unknown class {s:?}"))))
        .transpose()?;
    let needle = q.query.as_deref().unwrap_or("").to_lowercase();
    let mut rows: Vec<&ConceptRow> = bundle
        .rows
        .iter()
        .filter(|r| class.map_or(true, |c| r.coverage_class == c))
        .filter(|r| q.gap.map_or(true, |g| r.is_model_gap == g))
        .filter(|r| needle.is_empty() || r.label.to_lowercase().contains(&needle))
        .collect();
    rows.sort_by(|a, b| compare(a, b, q.sort, q.dir));

    let page_size = bundle.manifest.page_size;
    let total = rows.len();
    let page_count = total.div_ceil(page_size).max(1);
    if q.page >= page_count {
        return Err(BadRequest(format!("page {} out of range (page_count {page_count})", q.page)));
    }
    let start = q.page * page_size;
    let end = (start + page_size).min(total);
    Ok(ConceptPage {
        page: q.page,
        page_size,
        page_count,
        total,
        rows: rows[start..end].iter().map(|r| (*r).clone()).collect(),
    })
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

type Shared = Arc<StaticBundle>;

async fn manifest(State(b): State<Shared>) -> Response {
    Json(&b.manifest).into_response()
}

async fn concepts(State(b): State<Shared>, q: Result<Query<ConceptQuery>, axum::extract::rejection::QueryRejection>) -> Response {
    let Query(q) = match q {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    match query_concepts(&b, &q) {
        Ok(page) => Json(page).into_response(),
        Err(BadRequest(m)) => error(StatusCode::BAD_REQUEST, m),
    }
}

async fn concept_detail(State(b): State<Shared>, Path(id): Path<String>) -> Response {
    match id.parse().ok().and_then(|id| b.detail(id)) {
        Some(d) => Json(d).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown concept {id}")),
    }
}

async fn benchmarks(State(b): State<Shared>) -> Response {
    Json(&b.benchmarks).into_response()
}

async fn distributions(State(b): State<Shared>) -> Response {
    Json(&b.distributions).into_response()
}

async fn overlap(State(b): State<Shared>) -> Response {
    Json(&b.overlap).into_response()
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such route")
}

/// The API router. Only GET routes exist; CORS is open so a browser
/// explorer on another origin can read it.
pub fn router(bundle: Arc<StaticBundle>) -> Router {
    Router::new()
        .route("/manifest", get(manifest))
        .route("/concepts", get(concepts))
        .route("/concepts/{id}", get(concept_detail))
        .route("/benchmarks", get(benchmarks))
        .route("/distributions", get(distributions))
        .route("/overlap", get(overlap))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(bundle)
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })
}

/// Serves until the listener fails.
pub async fn serve_on(listener: TcpListener, bundle: Arc<StaticBundle>) -> Result<(), ServeError> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("serving {} concepts on http://{addr}", bundle.rows.len());
    }
    axum::serve(listener, router(bundle)).await.map_err(ServeError::Serve)
}

pub async fn serve(bundle: Arc<StaticBundle>, addr: SocketAddr) -> Result<(), ServeError> {
    serve_on(bind(addr).await?, bundle).await
}
