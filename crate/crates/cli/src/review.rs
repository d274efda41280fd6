use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lithoseg_core::coarse::{
    append_decisions, iteration_dir, latest_decisions, read_decisions, CurationDecision, DecisionSource, IterationReport,
    IterationStatus,
};
use lithoseg_core::imgcore::{encode_overlay_png, load_image, load_mask};
use lithoseg_core::synthgen::Split;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{CliError, CliResult};
use crate::manifest::{Run, Stage};
use crate::pipeline::{corpus_manifest, read_json};

pub const DEFAULT_PORT: u16 = 8787;
pub const OVERLAY_ALPHA: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionStatus {
    Undecided,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub sem_path: String,
    pub overlay_path: String,
    pub image_url: String,
    pub overlay_url: String,
    pub status: DecisionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub iteration: usize,
    pub awaiting: bool,
    pub total: usize,
    pub decided: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub undecided: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct DecisionBody {
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct DecisionQuery {
    #[serde(default)]
    pub overwrite: bool,
}

/// The bootstrap iteration under review and the files it exposes.
#[derive(Debug)]
pub struct ReviewState {
    pub iteration: usize,
    pub awaiting: bool,
    pub iter_dir: PathBuf,
    /// Sample id to SEM image path, ordered by id.
    pub items: BTreeMap<String, PathBuf>,
    write_lock: Mutex<()>,
}

impl ReviewState {
    /// Review the iteration parked for curation, or the latest one when none is.
    pub fn for_run(run: &Run) -> CliResult<ReviewState> {
        let coarse = run.stage_dir(Stage::Bootstrap);
        let mut latest = None;
        let mut k = 1;
        while iteration_dir(&coarse, k).join("masks").is_dir() {
            let rep: Option<IterationReport> = read_json(&iteration_dir(&coarse, k).join("report.json")).ok();
            let awaiting = matches!(rep.map(|r| r.status), Some(IterationStatus::AwaitingCuration { .. }));
            latest = Some((k, awaiting));
            if awaiting {
                break;
            }
            k += 1;
        }
        let Some((iteration, awaiting)) = latest else {
            return Err(CliError::Missing(iteration_dir(&coarse, 1).join("masks")));
        };
        let corpus = corpus_manifest(run)?;
        let root = run.corpus_dir();
        let iter_dir = iteration_dir(&coarse, iteration);
        let sems: HashMap<&str, PathBuf> = corpus
            .entries_in(Split::Train)
            .map(|e| (e.id.as_str(), e.dir(&root).join("sem.png")))
            .collect();
        let mut items = BTreeMap::new();
        for entry in fs::read_dir(iter_dir.join("masks"))? {
            let p = entry?.path();
            if p.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if let Some(sem) = sems.get(id.as_str()) {
                items.insert(id, sem.clone());
            }
        }
        Ok(ReviewState::new(iteration, awaiting, iter_dir, items))
    }

    pub fn new(iteration: usize, awaiting: bool, iter_dir: PathBuf, items: BTreeMap<String, PathBuf>) -> Self {
        Self {
            iteration,
            awaiting,
            iter_dir,
            items,
            write_lock: Mutex::new(()),
        }
    }

    pub fn decisions_path(&self) -> PathBuf {
        self.iter_dir.join("decisions.jsonl")
    }

    fn mask_path(&self, id: &str) -> PathBuf {
        self.iter_dir.join("masks").join(format!("{id}.png"))
    }

    fn overlay_path(&self, id: &str) -> PathBuf {
        self.iter_dir.join("overlays").join(format!("{id}.png"))
    }

    fn statuses(&self) -> CliResult<HashMap<String, DecisionStatus>> {
        let all = read_decisions(&self.decisions_path())?.unwrap_or_default();
        Ok(latest_decisions(&all)
            .into_iter()
            .map(|(id, d)| {
                let s = if d.accepted {
                    DecisionStatus::Accepted
                } else {
                    DecisionStatus::Rejected
                };
                (id, s)
            })
            .collect())
    }

    fn item(&self, id: &str, status: DecisionStatus) -> ReviewItem {
        ReviewItem {
            id: id.to_string(),
            sem_path: self.items[id].display().to_string(),
            overlay_path: self.overlay_path(id).display().to_string(),
            image_url: format!("/api/items/{id}/image"),
            overlay_url: format!("/api/items/{id}/overlay"),
            status,
        }
    }

    pub fn list(&self) -> CliResult<Vec<ReviewItem>> {
        let st = self.statuses()?;
        Ok(self
            .items
            .keys()
            .map(|id| self.item(id, st.get(id).copied().unwrap_or(DecisionStatus::Undecided)))
            .collect())
    }

    pub fn progress(&self) -> CliResult<Progress> {
        let st = self.statuses()?;
        let count = |want: DecisionStatus| self.items.keys().filter(|id| st.get(*id) == Some(&want)).count();
        let (accepted, rejected) = (count(DecisionStatus::Accepted), count(DecisionStatus::Rejected));
        Ok(Progress {
            iteration: self.iteration,
            awaiting: self.awaiting,
            total: self.items.len(),
            decided: accepted + rejected,
            accepted,
            rejected,
            undecided: self.items.len() - accepted - rejected,
        })
    }

    /// Overlay PNG, rebuilt when missing or older than the mask.
    pub fn overlay(&self, id: &str) -> CliResult<Vec<u8>> {
        let out = self.overlay_path(id);
        let mask = self.mask_path(id);
        let modified = |p: &Path| fs::metadata(p).and_then(|m| m.modified()).ok();
        if let (Some(o), Some(m)) = (modified(&out), modified(&mask)) {
            if o >= m {
                return Ok(fs::read(&out)?);
            }
        }
        let png = encode_overlay_png(&load_image(&self.items[id])?, &load_mask(&mask)?, OVERLAY_ALPHA)?;
        fs::create_dir_all(out.parent().expect("overlay path has a parent"))?;
        let tmp = out.with_extension("png.tmp");
        fs::write(&tmp, &png)?;
        fs::rename(&tmp, &out)?;
        Ok(png)
    }

    /// Record a human decision. `Ok(None)` when the item is already decided
    /// and `overwrite` is false.
    pub fn decide(&self, id: &str, accepted: bool, overwrite: bool) -> CliResult<Option<ReviewItem>> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let st = self.statuses()?;
        if st.contains_key(id) && !overwrite {
            return Ok(None);
        }
        append_decisions(
            &self.decisions_path(),
            &[CurationDecision::new(id, accepted, DecisionSource::Human)],
        )?;
        let s = if accepted {
            DecisionStatus::Accepted
        } else {
            DecisionStatus::Rejected
        };
        Ok(Some(self.item(id, s)))
    }
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": msg.into() }))).into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

async fn blocking<T, F>(f: F) -> Result<T, Response>
where
    F: FnOnce() -> CliResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(internal)?
        .map_err(internal)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn list_items(State(st): State<Arc<ReviewState>>) -> Response {
    match blocking(move || st.list()).await {
        Ok(items) => Json(items).into_response(),
        Err(r) => r,
    }
}

async fn progress(State(st): State<Arc<ReviewState>>) -> Response {
    match blocking(move || st.progress()).await {
        Ok(p) => Json(p).into_response(),
        Err(r) => r,
    }
}

async fn item_image(State(st): State<Arc<ReviewState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = st.items.get(&id).cloned() else {
        return error(StatusCode::NOT_FOUND, format!("unknown item {id}"));
    };
    match blocking(move || Ok(fs::read(path)?)).await {
        Ok(b) => png(b),
        Err(r) => r,
    }
}

async fn item_overlay(State(st): State<Arc<ReviewState>>, UrlPath(id): UrlPath<String>) -> Response {
    if !st.items.contains_key(&id) {
        return error(StatusCode::NOT_FOUND, format!("unknown item {id}"));
    }
    match blocking(move || st.overlay(&id)).await {
        Ok(b) => png(b),
        Err(r) => r,
    }
}

async fn post_decision(
    State(st): State<Arc<ReviewState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<DecisionQuery>,
    Json(body): Json<DecisionBody>,
) -> Response {
    if !st.items.contains_key(&id) {
        return error(StatusCode::NOT_FOUND, format!("unknown item {id}"));
    }
    let key = id.clone();
    match blocking(move || st.decide(&key, body.accepted, q.overwrite)).await {
        Ok(Some(item)) => Json(item).into_response(),
        Ok(None) => error(
            StatusCode::CONFLICT,
            format!("item {id} is already decided; repeat with ?overwrite=true to replace it"),
        ),
        Err(r) => r,
    }
}

/// API routes, plus the static UI bundle as fallback when `ui_dir` is given.
pub fn router(state: Arc<ReviewState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/items", get(list_items))
        .route("/api/items/{id}/image", get(item_image))
        .route("/api/items/{id}/overlay", get(item_overlay))
        .route("/api/items/{id}/decision", post(post_decision))
        .route("/api/progress", get(progress))
        .with_state(state);
    match ui_dir {
        Some(d) => api.fallback_service(ServeDir::new(d).append_index_html_on_directories(true)),
        None => api,
    }
}

pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down review server");
}

pub fn cmd_review_serve(run: &Run, port: u16, ui_dir: Option<&Path>) -> CliResult<()> {
    let state = Arc::new(ReviewState::for_run(run)?);
    if !state.awaiting {
        log::warn!("iteration {} is not awaiting curation; decisions will not be consumed", state.iteration);
    }
    if let Some(d) = ui_dir {
        if !d.is_dir() {
            return Err(CliError::Missing(d.to_path_buf()));
        }
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Internal(format!("bind {addr}: {e}")))?;
        log::info!(
            "reviewing iteration {} ({} items) on http://{}",
            state.iteration,
            state.items.len(),
            listener.local_addr()?
        );
        axum::serve(listener, router(state, ui_dir))
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        Ok(())
    })
}
