//! HTTP API for the explorer: disks, spins, rewrites, projections, favorites.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use llull_core::gateway::Gateway;
use llull_core::machine::{basic_template, instantiate, parse_template, RawIdea, Sampling, Slot, Template};
use llull_core::projection::export::{COORDINATES_FILE, MANIFEST_FILE};
use llull_core::projection::{density_grid, EmbeddedPoint, ExportManifest};
use llull_core::registry::{top_k, ElementGroup, VenueRegistries};
use llull_core::rewriting::{rewrite, IdeaRecord};
use llull_core::Disk;
use rand::seq::index;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::cli::find_venue;

pub const DEFAULT_POOL_K: usize = 20;
pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Pool size per disk for unlocked spin slots.
    pub pool_k: usize,
    /// Directory whose subdirectories are projection runs.
    pub projections: Option<PathBuf>,
    pub favorites: PathBuf,
    pub allow_origin: Option<String>,
}

pub struct AppState {
    registries: Vec<VenueRegistries>,
    gateway: Option<Arc<Gateway>>,
    config: ServerConfig,
    spin_counter: AtomicU64,
    favorites_lock: Mutex<()>,
}

impl AppState {
    pub fn new(registries: Vec<VenueRegistries>, gateway: Option<Gateway>, config: ServerConfig) -> Arc<Self> {
        Arc::new(AppState {
            registries,
            gateway: gateway.map(Arc::new),
            config,
            spin_counter: AtomicU64::new(0),
            favorites_lock: Mutex::new(()),
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "invalid_request", message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, code: "not_found", message: message.into() }
    }

    fn gateway(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_GATEWAY, code: "gateway_failure", message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, code: "internal", message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let origin = match &state.config.allow_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::any(),
        },
        None => AllowOrigin::any(),
    };
    let cors =
        CorsLayer::new().allow_origin(origin).allow_methods(tower_http::cors::Any).allow_headers(tower_http::cors::Any);
    Router::new()
        .route("/api/venues", get(venues))
        .route("/api/disks", get(disks))
        .route("/api/templates", get(templates))
        .route("/api/spin", post(spin))
        .route("/api/rewrite", post(rewrite_idea))
        .route("/api/projection", get(projection))
        .route("/api/favorites", get(list_favorites).post(add_favorite))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors)
        .with_state(state)
}

/// Run the server until interrupted.
pub fn serve_blocking(
    addr: SocketAddr,
    registries: Vec<VenueRegistries>,
    gateway: Option<Gateway>,
    config: ServerConfig,
) -> anyhow::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let app = router(AppState::new(registries, gateway, config));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn lookup<'a>(state: &'a AppState, venue: &str, year: Option<i32>) -> Result<&'a VenueRegistries, ApiError> {
    find_venue(&state.registries, venue, year).ok_or_else(|| ApiError::bad_request(format!("unknown venue {venue:?}")))
}

#[derive(Debug, Serialize)]
struct VenueInfo {
    label: String,
    venue: String,
    year: Option<i32>,
    papers: usize,
    themes: usize,
    domains: usize,
    methods: usize,
    templates: usize,
}

async fn venues(State(state): State<Arc<AppState>>) -> Json<Vec<VenueInfo>> {
    Json(
        state
            .registries
            .iter()
            .map(|r| VenueInfo {
                label: r.label(),
                venue: r.venue.clone(),
                year: r.year,
                papers: r.papers,
                themes: r.disk(Disk::A).groups.len(),
                domains: r.disk(Disk::B).groups.len(),
                methods: r.disk(Disk::C).groups.len(),
                templates: r.templates.templates.len(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct DiskQuery {
    venue: String,
    year: Option<i32>,
    disk: String,
    k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct DiskView<'a> {
    venue: String,
    disk: Disk,
    total: usize,
    groups: Vec<&'a ElementGroup>,
}

async fn disks(
    State(state): State<Arc<AppState>>,
    query: Result<Query<DiskQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query?;
    let disk: Disk = q.disk.parse().map_err(ApiError::bad_request)?;
    let r = lookup(&state, &q.venue, q.year)?;
    let reg = r.disk(disk);
    let k = q.k.unwrap_or(state.config.pool_k);
    let view = DiskView { venue: r.label(), disk, total: reg.groups.len(), groups: top_k(reg, k) };
    Ok(Json(view).into_response())
}

#[derive(Debug, Deserialize)]
struct TemplateQuery {
    venue: String,
    year: Option<i32>,
}

async fn templates(
    State(state): State<Arc<AppState>>,
    query: Result<Query<TemplateQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query?;
    let r = lookup(&state, &q.venue, q.year)?;
    Ok(Json(&r.templates).into_response())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpinRequest {
    pub venue: String,
    #[serde(default)]
    pub year: Option<i32>,
    /// Template source, or "basic" (the default).
    #[serde(default)]
    pub template: Option<String>,
    /// Slot marker (e.g. "A1") to element.
    #[serde(default)]
    pub locks: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Draw unlocked slots from the whole disk instead of the top-k pool.
    #[serde(default)]
    pub wild: bool,
}

async fn spin(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SpinRequest>, JsonRejection>,
) -> ApiResult<RawIdea> {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or_else(|| state.spin_counter.fetch_add(1, Ordering::Relaxed));
    spin_idea(&state, &req, seed).map(Json)
}

/// Locks are resolved against the registry; the remaining slots of each disk
/// are drawn without repetition from the pool, seeded by `seed` alone.
fn spin_idea(state: &AppState, req: &SpinRequest, seed: u64) -> Result<RawIdea, ApiError> {
    let r = lookup(state, &req.venue, req.year)?;
    let template: Template = match req.template.as_deref().map(str::trim) {
        None | Some("") | Some("basic") => basic_template(),
        Some(src) => parse_template(src).map_err(|e| ApiError::bad_request(e.to_string()))?,
    };
    let mut bindings: BTreeMap<Slot, String> = BTreeMap::new();
    for (marker, element) in &req.locks {
        let slot: Slot = marker.parse().map_err(|e: String| ApiError::bad_request(e))?;
        if !template.slots().contains(&slot) {
            return Err(ApiError::bad_request(format!("lock {slot} is not a slot of the template")));
        }
        let group = r.disk(slot.disk).resolve(element).ok_or_else(|| {
            ApiError::bad_request(format!("{element:?} is not in disk {} of {}", slot.disk, r.label()))
        })?;
        bindings.insert(slot, group.canonical.clone());
    }
    let mut rng = llull_core::rng::seeded_rng(seed);
    for disk in Disk::ALL {
        let open: Vec<Slot> =
            template.slots().iter().filter(|s| s.disk == disk && !bindings.contains_key(s)).copied().collect();
        if open.is_empty() {
            continue;
        }
        let taken: HashSet<&str> = template
            .slots()
            .iter()
            .filter(|s| s.disk == disk)
            .filter_map(|s| bindings.get(s))
            .map(String::as_str)
            .collect();
        let reg = r.disk(disk);
        let pool: Vec<&ElementGroup> =
            if req.wild { top_k(reg, reg.groups.len()) } else { top_k(reg, state.config.pool_k) };
        let pool: Vec<&str> = pool.iter().map(|g| g.canonical.as_str()).filter(|c| !taken.contains(c)).collect();
        if pool.len() < open.len() {
            return Err(ApiError::bad_request(format!(
                "disk {disk} of {} has {} free elements for {} open slots",
                r.label(),
                pool.len(),
                open.len()
            )));
        }
        let picks: Vec<String> =
            index::sample(&mut rng, pool.len(), open.len()).iter().map(|i| pool[i].to_owned()).collect();
        bindings.extend(open.into_iter().zip(picks));
    }
    instantiate(&template, &bindings, Some(r.label()), Sampling::Spin { seed })
        .map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn rewrite_idea(
    State(state): State<Arc<AppState>>,
    body: Result<Json<RawIdea>, JsonRejection>,
) -> ApiResult<IdeaRecord> {
    let Json(raw) = body?;
    let gateway = state.gateway.clone().ok_or_else(|| ApiError::gateway("no gateway configured"))?;
    let record = tokio::task::spawn_blocking(move || rewrite(&raw, &gateway))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::gateway(e.to_string()))?;
    Ok(Json(record))
}

#[derive(Debug, Deserialize)]
struct ProjectionQuery {
    run: Option<String>,
}

#[derive(Debug, Serialize)]
struct GridView {
    venue: String,
    resolution: usize,
    /// Row-major, row 0 at the lowest y.
    values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ProjectionView {
    run: String,
    manifest: ExportManifest,
    points: Vec<EmbeddedPoint>,
    grids: Vec<GridView>,
}

#[derive(Debug, Serialize)]
struct RunList {
    runs: Vec<String>,
}

async fn projection(
    State(state): State<Arc<AppState>>,
    query: Result<Query<ProjectionQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query?;
    let root =
        state.config.projections.as_deref().ok_or_else(|| ApiError::not_found("no projection directory configured"))?;
    match q.run {
        None => Ok(Json(RunList { runs: list_runs(root) }).into_response()),
        Some(run) => {
            if run.is_empty() || run.starts_with('.') || run.contains(['/', '\\']) {
                return Err(ApiError::bad_request(format!("invalid run name {run:?}")));
            }
            let dir = root.join(&run);
            if !dir.join(MANIFEST_FILE).is_file() {
                return Err(ApiError::not_found(format!("no projection run {run:?}")));
            }
            let view = tokio::task::spawn_blocking(move || load_projection(run, &dir))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))??;
            Ok(Json(view).into_response())
        }
    }
}

fn list_runs(root: &Path) -> Vec<String> {
    let mut runs: Vec<String> = fs::read_dir(root)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().join(MANIFEST_FILE).is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    runs.sort();
    runs
}

fn load_projection(run: String, dir: &Path) -> Result<ProjectionView, ApiError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| ApiError::internal(e.to_string()))?;
    let manifest: ExportManifest = serde_json::from_str(&text).map_err(|e| ApiError::internal(e.to_string()))?;
    let mut reader =
        csv::Reader::from_path(dir.join(COORDINATES_FILE)).map_err(|e| ApiError::internal(e.to_string()))?;
    let points: Vec<EmbeddedPoint> =
        reader.deserialize().collect::<Result<_, _>>().map_err(|e| ApiError::internal(e.to_string()))?;
    let grids = match &manifest.frame {
        Some(frame) => manifest
            .panels
            .iter()
            .map(|p| {
                let pts: Vec<EmbeddedPoint> = points.iter().filter(|q| q.venue == p.venue).cloned().collect();
                let g = density_grid(&pts, frame);
                GridView { venue: p.venue.clone(), resolution: g.resolution, values: g.values }
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(ProjectionView { run, manifest, points, grids })
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

type FavoritesDoc = BTreeMap<String, Vec<IdeaRecord>>;

fn read_favorites(path: &Path) -> Result<FavoritesDoc, ApiError> {
    match fs::read_to_string(path) {
        Ok(text) if text.trim().is_empty() => Ok(FavoritesDoc::new()),
        Ok(text) => {
            serde_json::from_str(&text).map_err(|e| ApiError::internal(format!("favorites file is corrupt: {e}")))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(FavoritesDoc::new()),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

/// Write through a temp file in the same directory so a crash never leaves a
/// half-written document.
fn write_favorites(path: &Path, doc: &FavoritesDoc) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, doc)?;
    tmp.write_all(b"\n")?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn session_name(q: SessionQuery) -> String {
    q.session.filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_SESSION.to_owned())
}

async fn list_favorites(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SessionQuery>, QueryRejection>,
) -> ApiResult<Vec<IdeaRecord>> {
    let Query(q) = query?;
    let session = session_name(q);
    let _guard = state.favorites_lock.lock().map_err(|e| ApiError::internal(e.to_string()))?;
    let mut doc = read_favorites(&state.config.favorites)?;
    Ok(Json(doc.remove(&session).unwrap_or_default()))
}

async fn add_favorite(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SessionQuery>, QueryRejection>,
    body: Result<Json<IdeaRecord>, JsonRejection>,
) -> ApiResult<Vec<IdeaRecord>> {
    let Query(q) = query?;
    let Json(record) = body?;
    if record.title.trim().is_empty() {
        return Err(ApiError::bad_request("favorite has an empty title"));
    }
    let session = session_name(q);
    let _guard = state.favorites_lock.lock().map_err(|e| ApiError::internal(e.to_string()))?;
    let mut doc = read_favorites(&state.config.favorites)?;
    let list = doc.entry(session).or_default();
    list.push(record);
    let out = list.clone();
    write_favorites(&state.config.favorites, &doc).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(out))
}
