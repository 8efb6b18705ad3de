//! JSON API over a corpus directory, consumed by the triage dashboard.
//!
//! Reads load the corpus from disk on every request and never write.
//! Label submissions take the corpus writer lock without waiting and answer
//! 409 when another writer holds it.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use inspect_core::analytics::{
    all_stats, compute_stats, percentage_chart_data, trend_flags, yearly_comment_totals,
};
use inspect_core::bridge::git::read_path;
use inspect_core::corpus::{CorpusDir, CorpusError, StoreError};
use inspect_core::taxonomy::TaxonomyError;
use inspect_core::{
    taxonomy, Category, CommentId, Corpus, InspectionComment, LabelAssignment, LabelSet, Labeler,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::Backend;
use crate::commands::load_model;
use crate::config::ServiceConfig;

#[derive(Clone)]
pub struct AppState {
    pub dir: CorpusDir,
    pub config: Arc<ServiceConfig>,
    pub backend: Option<Arc<Backend>>,
    pub now: Option<DateTime<Utc>>,
}

impl AppState {
    /// State for `config`. A missing or incomplete transport setup only
    /// disables the image endpoint.
    pub fn new(config: ServiceConfig, now: Option<DateTime<Utc>>) -> Result<Self, StoreError> {
        let dir = CorpusDir::open(&config.corpus_dir)?;
        let backend = match Backend::from_config(&config, now) {
            Ok(b) => Some(Arc::new(b)),
            Err(e) => {
                log::info!("image endpoint disabled: {e:#}");
                None
            }
        };
        Ok(AppState {
            dir,
            config: Arc::new(config),
            backend,
            now,
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Busy(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            other => ApiError::internal(other),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs file and network work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(ApiError::internal)?
}

#[derive(Debug, Serialize)]
pub struct CommentView {
    #[serde(flatten)]
    pub comment: InspectionComment,
    pub labels: Option<LabelSet>,
    pub labeler: Option<Labeler>,
}

fn view(corpus: &Corpus, c: &InspectionComment) -> CommentView {
    let eff = corpus.effective_assignment(&c.id);
    CommentView {
        comment: c.clone(),
        labels: eff.map(|a| a.labels.clone()),
        labeler: eff.map(|a| a.labeler.clone()),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct CommentQuery {
    pub year: Option<i32>,
    pub group: Option<String>,
    #[serde(default)]
    pub unlabeled: bool,
}

async fn list_comments(
    State(st): State<AppState>,
    Query(q): Query<CommentQuery>,
) -> ApiResult<Json<Vec<CommentView>>> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let out = corpus
            .comments()
            .filter(|c| q.year.is_none_or(|y| c.year == y))
            .filter(|c| q.group.as_deref().is_none_or(|g| c.group == g))
            .filter(|c| !q.unlabeled || corpus.effective_labels(&c.id).is_none())
            .map(|c| view(&corpus, c))
            .collect();
        Ok(Json(out))
    })
    .await
}

#[derive(Debug, Serialize)]
pub struct CommentDetail {
    #[serde(flatten)]
    pub view: CommentView,
    pub history: Vec<LabelAssignment>,
}

async fn get_comment(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<CommentDetail>> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let id = CommentId(id);
        let c = corpus
            .get(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown comment `{id}`")))?;
        let history = corpus
            .assignments()
            .iter()
            .filter(|a| a.comment_id == id)
            .cloned()
            .collect();
        Ok(Json(CommentDetail {
            view: view(&corpus, c),
            history,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct LabelRequest {
    pub labels: Vec<String>,
    #[serde(default)]
    pub labeler: Option<String>,
}

pub const DEFAULT_LABELER: &str = "triage";

async fn post_labels(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<LabelRequest>,
) -> ApiResult<(StatusCode, Json<LabelAssignment>)> {
    blocking(move || {
        let unprocessable = |e: TaxonomyError| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
        let cats = req
            .labels
            .iter()
            .map(|s| s.trim().parse::<Category>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(unprocessable)?;
        let labels = LabelSet::new(cats).map_err(unprocessable)?;
        let name = req
            .labeler
            .filter(|n| !n.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_LABELER.to_string());

        let lock = st.dir.try_lock()?;
        let mut corpus = st.dir.load()?;
        let id = CommentId(id);
        let at = st.now.unwrap_or_else(Utc::now);
        let a = corpus
            .assign_labels(&id, labels.iter(), Labeler::Human(name), at)
            .map_err(|e| match e {
                CorpusError::UnknownComment(id) => ApiError::not_found(format!("unknown comment `{id}`")),
                CorpusError::Taxonomy(t) => unprocessable(t),
            })?;
        st.dir.save(&corpus, &lock)?;
        Ok((StatusCode::CREATED, Json(a)))
    })
    .await
}

#[derive(Debug, Serialize)]
pub struct Suggestion {
    pub comment_id: CommentId,
    pub model_version: String,
    pub labels: LabelSet,
    /// Taxonomy order.
    pub scores: Vec<ScoreEntry>,
}

#[derive(Debug, Serialize)]
pub struct ScoreEntry {
    pub slug: Category,
    pub score: f64,
}

async fn get_suggestion(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Suggestion>> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let id = CommentId(id);
        let c = corpus
            .get(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown comment `{id}`")))?;
        let model = load_model(&st.dir)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::not_found("no model"))?;
        let p = model
            .predict(&c.body)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        Ok(Json(Suggestion {
            comment_id: id,
            model_version: model.version.clone(),
            scores: p
                .ranked_by_taxonomy()
                .map(|(slug, score)| ScoreEntry { slug, score })
                .collect(),
            labels: p.labels,
        }))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
pub struct StatsQuery {
    pub year: Option<i32>,
    pub group: Option<String>,
}

async fn get_stats(State(st): State<AppState>, Query(q): Query<StatsQuery>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let groups = match (q.year, q.group.as_deref()) {
            (Some(y), Some(g)) => vec![compute_stats(&corpus, y, g)],
            (y, g) => all_stats(&corpus)
                .into_iter()
                .filter(|s| y.is_none_or(|y| s.year == y) && g.is_none_or(|g| s.group == g))
                .collect(),
        };
        let flags = trend_flags(&groups, &st.config.trend_thresholds)
            .map_err(|e| ApiError::internal(e))?;
        let totals: BTreeMap<String, usize> = yearly_comment_totals(&corpus)
            .into_iter()
            .map(|(y, n)| (y.to_string(), n))
            .collect();
        Ok(Json(json!({
            "groups": groups,
            "yearly_totals": totals,
            "flags": flags,
        })))
    })
    .await
}

async fn get_chart(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let flags = trend_flags(&all_stats(&corpus), &st.config.trend_thresholds)
            .map_err(|e| ApiError::internal(e))?;
        Ok(Json(json!({
            "series": percentage_chart_data(&corpus),
            "flags": flags,
        })))
    })
    .await
}

async fn get_image(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(move || {
        let corpus = st.dir.load()?;
        let id = CommentId(id);
        let c = corpus
            .get(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown comment `{id}`")))?;
        let (Some(path), Some(pr)) = (&c.image_path, &c.posted_in) else {
            return Err(ApiError::not_found(format!("comment `{id}` has no pin image")));
        };
        let backend = st
            .backend
            .as_ref()
            .ok_or_else(|| ApiError::not_found("no image store configured"))?;
        let store = backend
            .existing_store(&pr.repo)
            .ok_or_else(|| ApiError::not_found(format!("no image store for {}", pr.repo)))?;
        let bytes = read_path(store.as_ref(), &st.config.image_ref_name, path)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::not_found(format!("image {path} not found")))?;
        Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
    })
    .await
}

async fn get_taxonomy() -> Json<Value> {
    Json(json!(taxonomy()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/comments", get(list_comments))
        .route("/api/comments/{id}", get(get_comment))
        .route("/api/comments/{id}/labels", post(post_labels))
        .route("/api/suggestions/{id}", get(get_suggestion))
        .route("/api/stats", get(get_stats))
        .route("/api/chart", get(get_chart))
        .route("/api/images/{id}", get(get_image))
        .route("/api/taxonomy", get(get_taxonomy))
        .with_state(state)
}

pub async fn serve(state: AppState, listen: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
