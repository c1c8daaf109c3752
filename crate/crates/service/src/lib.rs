//! HTTP backend for interactive exploration: dataset sessions, Jacobi edge
//! projections, density backdrops, control-edge hit queries and surface
//! extraction.
//!
//! Sessions are immutable once loaded; every request works on its own
//! scratch, and heavy work runs on the blocking pool behind a semaphore.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fibersurf::export::{density_pgm, raster_u16};
use fibersurf::fiber::surface_from_tets;
use fibersurf::{
    component_from_jacobi_edge, compute_jacobi_set, density_raster, extract_fiber_surface_tets,
    jacobi_intersections, load_dataset, range_rect, BivariateField, ControlEdge, DensityRaster,
    FiberSurfaceMesh, JacobiSet, RangePoint, RangeRect, SearchError, SearchTrace, TetMesh,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

pub const PGM_MIME: &str = "image/x-portable-graymap";
pub const BINARY_MIME: &str = "application/octet-stream";
/// Leading bytes of the binary surface payload.
pub const SURFACE_MAGIC: &[u8; 4] = b"FSRF";

const DENSITY_SAMPLES: usize = 8;
const DENSITY_SEED: u64 = 0;
const MAX_RASTER_SIDE: usize = 4096;

pub struct Session {
    pub id: String,
    pub mesh: TetMesh,
    pub field: BivariateField,
    pub jset: JacobiSet,
    pub created: SystemTime,
    density: Mutex<HashMap<(usize, usize), Arc<DensityRaster>>>,
}

#[derive(Clone)]
pub struct AppState {
    datasets_dir: PathBuf,
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    next_id: Arc<AtomicU64>,
    workers: Arc<Semaphore>,
}

impl AppState {
    /// `workers` bounds concurrent loads, rasterizations and extractions.
    pub fn new(datasets_dir: impl Into<PathBuf>, workers: usize) -> Self {
        Self {
            datasets_dir: datasets_dir.into(),
            sessions: Default::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }

    async fn run_blocking<T: Send + 'static>(
        &self,
        job: impl FnOnce() -> T + Send + 'static,
    ) -> Result<T, ApiError> {
        let _permit = self.workers.acquire().await.map_err(ApiError::internal)?;
        tokio::task::spawn_blocking(job).await.map_err(ApiError::internal)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/jacobi", get(jacobi))
        .route("/sessions/{id}/density", get(density))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/extract", post(extract))
        .with_state(state)
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

type Pair = [f64; 2];

fn pair(p: RangePoint) -> Pair {
    [p.a, p.b]
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct RectJson {
    pub min: Pair,
    pub max: Pair,
}

impl From<RangeRect> for RectJson {
    fn from(r: RangeRect) -> Self {
        Self { min: pair(r.min), max: pair(r.max) }
    }
}

#[derive(Deserialize)]
struct CreateSession {
    path: String,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct SessionInfo {
    pub session_id: String,
    pub n_vertices: usize,
    pub n_tets: usize,
    pub n_jacobi_edges: usize,
    pub range_rect: RectJson,
}

fn dataset_path(root: &Path, rel: &str) -> Result<PathBuf, ApiError> {
    let p = Path::new(rel);
    let plain = !rel.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !plain {
        return Err(ApiError::bad_request("path must be relative to the datasets directory"));
    }
    Ok(root.join(p))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Json<SessionInfo>, ApiError> {
    let Json(body) = body?;
    let path = dataset_path(&state.datasets_dir, &body.path)?;
    let (mesh, field, jset) = state
        .run_blocking(move || {
            load_dataset(&path).map(|(mesh, field)| {
                let jset = compute_jacobi_set(&mesh, &field);
                (mesh, field, jset)
            })
        })
        .await?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;

    let id = format!("s{:08x}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let info = SessionInfo {
        session_id: id.clone(),
        n_vertices: mesh.n_vertices(),
        n_tets: mesh.n_tets(),
        n_jacobi_edges: jset.len(),
        range_rect: range_rect(&field).into(),
    };
    let session = Session {
        id: id.clone(),
        mesh,
        field,
        jset,
        created: SystemTime::now(),
        density: Default::default(),
    };
    state.sessions.write().unwrap().insert(id, Arc::new(session));
    Ok(Json(info))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct JacobiEdgeJson {
    pub edge_id: u32,
    pub kind: String,
    pub image: [Pair; 2],
    pub domain: [[f64; 3]; 2],
}

async fn jacobi(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<JacobiEdgeJson>>, ApiError> {
    let s = state.session(&id)?;
    let edges = s
        .jset
        .edges()
        .iter()
        .map(|je| JacobiEdgeJson {
            edge_id: je.edge_id,
            kind: je.kind.to_string(),
            image: je.image.map(pair),
            domain: s.mesh.edge(je.edge_id).map(|v| s.mesh.position(v)),
        })
        .collect();
    Ok(Json(edges))
}

#[derive(Deserialize)]
struct DensityParams {
    w: Option<usize>,
    h: Option<usize>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct DensityJson {
    pub width: usize,
    pub height: usize,
    pub range_rect: RectJson,
    /// Density represented by 65535.
    pub max_density: f64,
    /// Row-major, first row = smallest f2.
    pub values: Vec<u16>,
}

fn accepts(headers: &HeaderMap, mime: &str) -> bool {
    headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .any(|v| v.split(',').any(|part| part.trim().starts_with(mime)))
}

async fn density(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<DensityParams>, QueryRejection>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let Query(params) = params?;
    let (w, h) = (params.w.unwrap_or(256), params.h.unwrap_or(256));
    if !(1..=MAX_RASTER_SIDE).contains(&w) || !(1..=MAX_RASTER_SIDE).contains(&h) {
        return Err(ApiError::bad_request(format!("raster sides must be in 1..={MAX_RASTER_SIDE}")));
    }
    let cached = s.density.lock().unwrap().get(&(w, h)).cloned();
    let raster = match cached {
        Some(r) => r,
        None => {
            let session = s.clone();
            let r = Arc::new(
                state
                    .run_blocking(move || {
                        density_raster(&session.mesh, &session.field, w, h, DENSITY_SAMPLES, DENSITY_SEED)
                    })
                    .await?,
            );
            s.density.lock().unwrap().entry((w, h)).or_insert(r).clone()
        }
    };
    if accepts(&headers, PGM_MIME) {
        let mut res = density_pgm(&raster).into_response();
        res.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(PGM_MIME));
        return Ok(res);
    }
    Ok(Json(DensityJson {
        width: raster.width,
        height: raster.height,
        range_rect: raster.range_rect.into(),
        max_density: raster.max_density(),
        values: raster_u16(&raster),
    })
    .into_response())
}

#[derive(Deserialize)]
struct EdgeBody {
    edge: [Pair; 2],
    jacobi_edge_id: Option<u32>,
}

impl EdgeBody {
    fn control_edge(&self) -> Result<ControlEdge, ApiError> {
        let [u, v] = self.edge.map(|[a, b]| RangePoint::new(a, b));
        ControlEdge::new(u, v).map_err(|e| ApiError::bad_request(e.to_string()))
    }
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct HitJson {
    pub jacobi_edge_id: u32,
    pub kind: String,
    pub point: Pair,
    pub image: [Pair; 2],
    pub domain: [[f64; 3]; 2],
}

#[derive(Serialize, Deserialize, Debug)]
pub struct QueryJson {
    pub hits: Vec<HitJson>,
    pub trace: SearchTrace,
}

async fn query(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<EdgeBody>, JsonRejection>,
) -> Result<Json<QueryJson>, ApiError> {
    let s = state.session(&id)?;
    let Json(body) = body?;
    let e = body.control_edge()?;
    let started = std::time::Instant::now();
    let hits = jacobi_intersections(&s.jset, &e);
    let trace = SearchTrace {
        n_jacobi_intersections: hits.len(),
        jacobi_intersections_ms: started.elapsed().as_secs_f64() * 1e3,
        ..Default::default()
    };
    let hits = hits
        .iter()
        .map(|h| {
            let je = s.jset.get(h.jacobi_edge_id).expect("hit comes from the Jacobi set");
            HitJson {
                jacobi_edge_id: h.jacobi_edge_id,
                kind: je.kind.to_string(),
                point: pair(h.point),
                image: je.image.map(pair),
                domain: s.mesh.edge(je.edge_id).map(|v| s.mesh.position(v)),
            }
        })
        .collect();
    Ok(Json(QueryJson { hits, trace }))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct MeshJson {
    /// `x, y, z` per vertex.
    pub positions: Vec<f64>,
    /// Three vertex indices per triangle.
    pub triangles: Vec<u32>,
    pub component_ids: Vec<u32>,
    pub t: Vec<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct ExtractJson {
    pub mesh: MeshJson,
    pub tet_count: usize,
    pub trace: SearchTrace,
}

impl From<&FiberSurfaceMesh> for MeshJson {
    fn from(s: &FiberSurfaceMesh) -> Self {
        Self {
            positions: s.positions.iter().flatten().copied().collect(),
            triangles: s.triangles.iter().flatten().copied().collect(),
            component_ids: s.component_id.clone(),
            t: s.t.clone(),
        }
    }
}

/// Little-endian: magic, `u32` vertex count, `u32` triangle count, `u64` tet
/// count, then `f64` positions, `f64` t, `u32` triangles, `u32` component ids.
pub fn surface_binary(s: &FiberSurfaceMesh, tet_count: usize) -> Vec<u8> {
    let mut out = SURFACE_MAGIC.to_vec();
    out.extend_from_slice(&(s.n_vertices() as u32).to_le_bytes());
    out.extend_from_slice(&(s.n_triangles() as u32).to_le_bytes());
    out.extend_from_slice(&(tet_count as u64).to_le_bytes());
    for x in s.positions.iter().flatten().chain(&s.t) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for i in s.triangles.iter().flatten().chain(&s.component_id) {
        out.extend_from_slice(&i.to_le_bytes());
    }
    out
}

async fn extract(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Result<Json<EdgeBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let Json(body) = body?;
    let e = body.control_edge()?;
    let selected = body.jacobi_edge_id;
    let session = s.clone();
    let (surface, tet_count, trace) = state
        .run_blocking(move || {
            let (mesh, field, jset) = (&session.mesh, &session.field, &session.jset);
            let (tets, trace) = match selected {
                Some(id) => component_from_jacobi_edge(mesh, field, jset, &e, id)?,
                None => extract_fiber_surface_tets(mesh, field, jset, &e),
            };
            Ok::<_, SearchError>((surface_from_tets(mesh, field, &e, &tets), tets.len(), trace))
        })
        .await?
        .map_err(|err| match err {
            SearchError::JacobiEdgeNotHit(_) => ApiError::new(StatusCode::CONFLICT, err.to_string()),
            other => ApiError::internal(other),
        })?;

    if accepts(&headers, BINARY_MIME) {
        let mut res = surface_binary(&surface, tet_count).into_response();
        res.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(BINARY_MIME));
        return Ok(res);
    }
    Ok(Json(ExtractJson { mesh: (&surface).into(), tet_count, trace }).into_response())
}
