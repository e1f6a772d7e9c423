//! HTTP API over a [`Service`]. Every handler runs the blocking session
//! operation on tokio's blocking pool.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use facetlit_core::corpus::{CorpusError, FetchStatus, Provenance, RelevanceCategory};
use facetlit_core::document::{CharRange, EditOperation, FacetType};
use facetlit_core::facets::FacetError;
use facetlit_core::pivot::PivotError;
use facetlit_core::session::{AssessRequest, RewriteAction, ServiceError, Service};

pub mod cli;

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn status_for(e: &ServiceError) -> StatusCode {
    use ServiceError as E;
    match e {
        E::UnknownSession(_) | E::UnknownPaper(_) | E::UnknownAssessment(_) => StatusCode::NOT_FOUND,
        E::EmptyIdea | E::EmptySelection | E::NothingToAssess(_) | E::NoRewriteTarget(_) | E::Document(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        E::Pivot(PivotError::MissingFacets(_) | PivotError::EmptySelection | PivotError::UnknownSegment(_) | PivotError::WrongFacet(..)) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        E::Facet(FacetError::EmptyIdea) | E::Corpus(CorpusError::EmptyQuery) => StatusCode::UNPROCESSABLE_ENTITY,
        E::Corpus(CorpusError::Unresolvable(..)) => StatusCode::NOT_FOUND,
        E::NotReady(_) | E::Conflict(_) | E::AlreadyDecided(_) => StatusCode::CONFLICT,
        E::AddPaperDisabled => StatusCode::FORBIDDEN,
        E::Pivot(PivotError::Gateway(_)) | E::Facet(_) | E::Organizer(_) | E::Corpus(CorpusError::Retrieval(_)) => {
            StatusCode::BAD_GATEWAY
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(ServiceError::Corrupt { path: "worker".into(), message: e.to_string() })),
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateBody {
    pub idea: String,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub session_id: String,
}

async fn create(State(svc): State<Arc<Service>>, Json(body): Json<CreateBody>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let id = svc.begin_session(&body.idea)?;
    let worker = svc.clone();
    let (sid, idea) = (id.clone(), body.idea);
    tokio::task::spawn_blocking(move || {
        if let Err(e) = worker.run_creation(&sid, &idea) {
            log::error!("{sid}: creation failed: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(Created { session_id: id })))
}

async fn status(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<facetlit_core::session::Progress> {
    Ok(Json(svc.progress(&id)?))
}

async fn session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<facetlit_core::session::Session> {
    Ok(Json(blocking(move || svc.get(&id)).await?))
}

#[derive(Debug, Serialize)]
pub struct PaperRow {
    pub paper_id: String,
    pub title: String,
    pub relevance: Option<RelevanceCategory>,
    pub provenance: Provenance,
    pub fetch_status: FetchStatus,
    pub selected: bool,
}

/// Corpus in ranked order, then any unclassified papers by id.
async fn corpus(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Vec<PaperRow>> {
    let s = blocking(move || svc.get(&id)).await?;
    let mut order: Vec<String> = s.ranking.entries.iter().map(|e| e.paper_id.clone()).collect();
    order.extend(s.corpus.papers.keys().filter(|k| !order.contains(k)).cloned().collect::<Vec<_>>());
    Ok(Json(
        order
            .into_iter()
            .filter_map(|pid| s.corpus.get(&pid))
            .map(|p| PaperRow {
                paper_id: p.paper_id.clone(),
                title: p.title.clone(),
                relevance: p.relevance,
                provenance: p.provenance(),
                fetch_status: p.fetch_status,
                selected: s.selection.contains(&p.paper_id),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
pub struct EditBody {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub replacement: String,
}

async fn edit(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(body): Json<EditBody>,
) -> ApiResult<facetlit_core::session::EditReport> {
    let op = EditOperation::new(CharRange::new(body.start, body.end), body.replacement);
    Ok(Json(blocking(move || svc.edit(&id, &op)).await?))
}

async fn segment(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    let s = blocking(move || svc.resegment(&id)).await?;
    Ok(Json(json!({ "segments": s.idea_document.segments(), "guidance": s.guidance })))
}

#[derive(Debug, Deserialize)]
pub struct SelectionBody {
    pub paper_ids: Vec<String>,
    #[serde(default = "yes")]
    pub selected: bool,
}

fn yes() -> bool {
    true
}

async fn selection(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(body): Json<SelectionBody>,
) -> ApiResult<serde_json::Value> {
    let sel = blocking(move || svc.select(&id, &body.paper_ids, body.selected)).await?;
    Ok(Json(json!({ "selection": sel })))
}

#[derive(Debug, Deserialize)]
pub struct AddPaperBody {
    pub paper_id: String,
}

async fn add_paper(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(body): Json<AddPaperBody>,
) -> ApiResult<serde_json::Value> {
    let outcome = blocking(move || svc.add_paper(&id, &body.paper_id)).await?;
    Ok(Json(json!({ "outcome": outcome })))
}

async fn clusters(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    let s = blocking(move || svc.get(&id)).await?;
    Ok(Json(json!(s.clusterings)))
}

async fn rank(
    State(svc): State<Arc<Service>>,
    Path((id, facet)): Path<(String, String)>,
) -> Result<Json<facetlit_core::organizer::StarOutcome>, Response> {
    let facet = FacetType::parse(&facet)
        .ok_or_else(|| (StatusCode::NOT_FOUND, Json(json!({ "error": format!("unknown facet {facet}") }))).into_response())?;
    blocking(move || svc.rank_clusters(&id, facet)).await.map(Json).map_err(IntoResponse::into_response)
}

async fn rerank(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    let notes = blocking(move || svc.rerank(&id)).await?;
    Ok(Json(json!({ "warnings": notes })))
}

async fn assess(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(body): Json<AssessRequest>,
) -> ApiResult<facetlit_core::session::AssessmentRecord> {
    Ok(Json(blocking(move || svc.run_assessment(&id, &body)).await?))
}

#[derive(Debug, Default, Deserialize)]
pub struct FullBody {
    #[serde(default)]
    pub steering: Option<String>,
}

async fn full(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Option<Json<FullBody>>,
) -> ApiResult<facetlit_core::pivot::FullAssessment> {
    let steering = body.and_then(|b| b.0.steering);
    Ok(Json(blocking(move || svc.full_assessment(&id, steering)).await?))
}

async fn rewrite(
    State(svc): State<Arc<Service>>,
    Path((id, aid)): Path<(String, String)>,
    Json(action): Json<RewriteAction>,
) -> ApiResult<facetlit_core::session::RewriteReport> {
    Ok(Json(blocking(move || svc.rewrite(&id, &aid, action)).await?))
}

async fn report(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let text = blocking(move || svc.export_report(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "text/markdown; charset=utf-8")], text).into_response())
}

pub fn app(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/:id", get(session))
        .route("/sessions/:id/status", get(status))
        .route("/sessions/:id/corpus", get(corpus))
        .route("/sessions/:id/edit", post(edit))
        .route("/sessions/:id/segment", post(segment))
        .route("/sessions/:id/selection", post(selection))
        .route("/sessions/:id/papers", post(add_paper))
        .route("/sessions/:id/clusters", get(clusters))
        .route("/sessions/:id/clusters/:facet/rank", post(rank))
        .route("/sessions/:id/rerank", post(rerank))
        .route("/sessions/:id/assessments", post(assess))
        .route("/sessions/:id/full-assessment", post(full))
        .route("/sessions/:id/assessments/:aid/rewrite", post(rewrite))
        .route("/sessions/:id/report", get(report))
        .with_state(service)
}
