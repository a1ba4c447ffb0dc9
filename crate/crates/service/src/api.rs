//! HTTP routes.
//!
//! | method | path                     |                                   |
//! |--------|--------------------------|-----------------------------------|
//! | POST   | `/cases`                 | upload a JSON case, returns its id |
//! | GET    | `/cases/{id}`            | canonical case document           |
//! | POST   | `/cases/{id}/optimize`   | start a search for one outage     |
//! | POST   | `/cases/{id}/screen`     | start an N-1 screening            |
//! | GET    | `/jobs`, `/jobs/{id}`    | job handles                       |
//! | GET    | `/runs`, `/runs/{id}`    | stored run index and records      |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridshed::grid::{parse_case, serialize_case_compact, Network};
use gridshed::report::{case_id, RunRecord, RunStore};
use gridshed::Error;
use serde::Serialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::jobs::{JobHandle, JobRegistry};
use crate::request::{parse_body, BodyError, OptimizeRequest, ScreenRequest};
use crate::runner;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Jobs computed at the same time. A screening job also parallelizes
    /// over its cases.
    pub workers: usize,
    pub max_body_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            workers: 2,
            max_body_bytes: 32 << 20,
        }
    }
}

struct Shared {
    store: RunStore,
    jobs: JobRegistry,
    workers: Arc<Semaphore>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    path: Option<String>,
    job: Option<JobHandle>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            path: None,
            job: None,
        }
    }

    /// Storage-side failure: missing ids become 404.
    fn store(e: Error) -> Self {
        match e {
            Error::NotFound(id) => ApiError::new(StatusCode::NOT_FOUND, format!("{id} not found")),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }

    /// A rejected case document.
    fn case(e: Error) -> Self {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, e.to_string());
        err.path = e.field_path().map(str::to_string);
        err
    }

    fn config(e: Error) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
    }

    fn body(e: BodyError) -> Self {
        match e {
            BodyError::Syntax(m) => ApiError::new(StatusCode::BAD_REQUEST, m),
            BodyError::Invalid { path, message } => ApiError {
                path: Some(path),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(p) = self.path {
            body["path"] = json!(p);
        }
        if let Some(j) = self.job {
            body["job"] = json!(j);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

impl AppState {
    pub fn new(store: RunStore, cfg: &ServiceConfig) -> Self {
        AppState(Arc::new(Shared {
            store,
            jobs: JobRegistry::default(),
            workers: Arc::new(Semaphore::new(cfg.workers.max(1))),
        }))
    }

    pub fn jobs(&self) -> &JobRegistry {
        &self.0.jobs
    }

    pub fn store(&self) -> &RunStore {
        &self.0.store
    }

    async fn network(&self, id: &str) -> ApiResult<Network> {
        let store = self.0.store.clone();
        let id = id.to_string();
        blocking(move || {
            let text = store.load_case(&id).map_err(ApiError::store)?;
            parse_case(&text).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
        })
        .await
    }

    /// Queues `work` on the worker pool. The record it returns is stored
    /// and the job marked done.
    fn spawn<F>(&self, job_id: String, work: F)
    where
        F: FnOnce(&(dyn Fn(usize, usize) + Sync)) -> gridshed::Result<RunRecord> + Send + 'static,
    {
        let state = self.clone();
        tokio::spawn(async move {
            let Ok(_permit) = state.0.workers.clone().acquire_owned().await else {
                state.0.jobs.fail(&job_id, "worker pool closed".into());
                return;
            };
            state.0.jobs.start(&job_id);
            tracing::info!(job = %job_id, "job started");
            let inner = state.clone();
            let id = job_id.clone();
            let outcome = tokio::task::spawn_blocking(move || {
                let sink = |done: usize, _total: usize| inner.0.jobs.progress(&id, done);
                let record = work(&sink)?;
                inner.0.store.store_run(&record)?;
                Ok::<_, Error>(record.run_id)
            })
            .await;
            match outcome {
                Ok(Ok(run_id)) => {
                    state.0.jobs.finish(&job_id);
                    tracing::info!(job = %job_id, run = %run_id, "job done");
                }
                Ok(Err(e)) => {
                    tracing::warn!(job = %job_id, error = %e, "job failed");
                    state.0.jobs.fail(&job_id, e.to_string());
                }
                Err(e) => {
                    tracing::error!(job = %job_id, error = %e, "job panicked");
                    state.0.jobs.fail(&job_id, format!("job aborted: {e}"));
                }
            }
        });
    }
}

#[derive(Serialize)]
struct CaseSummary {
    id: String,
    buses: usize,
    lines: usize,
    transformers: usize,
    generators: usize,
    loads: usize,
    total_load_mw: f64,
}

async fn upload_case(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<CaseSummary>)> {
    let store = state.0.store.clone();
    blocking(move || {
        let text = std::str::from_utf8(&body)
            .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "case document is not UTF-8"))?;
        let net = parse_case(text).map_err(ApiError::case)?;
        let canonical = serialize_case_compact(&net);
        let existed = store.load_case(&case_id(&canonical)).is_ok();
        let id = store.store_case(&canonical).map_err(ApiError::store)?;
        let status = if existed { StatusCode::OK } else { StatusCode::CREATED };
        Ok((
            status,
            Json(CaseSummary {
                id,
                buses: net.buses().len(),
                lines: net.lines().len(),
                transformers: net.transformers().len(),
                generators: net.generators().len(),
                loads: net.n_loads(),
                total_load_mw: net.total_load().0,
            }),
        ))
    })
    .await
}

async fn get_case(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = state.0.store.load_case(&id).map_err(ApiError::store)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn optimize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobHandle>)> {
    let net = state.network(&id).await?;
    let req: OptimizeRequest = parse_body(&body).map_err(ApiError::body)?;
    let cfg = req.normalize(&net).map_err(ApiError::config)?;
    let run_id = cfg.run_id(&id).map_err(ApiError::store)?;
    let total = runner::optimize_total(&cfg);
    if state.0.store.contains(&run_id) {
        return Ok((StatusCode::OK, Json(state.0.jobs.completed("optimize", &id, &run_id, total))));
    }

    // A plan that sheds nothing needs no job.
    let (net, cfg, immediate) = {
        let case = id.clone();
        let store = state.0.store.clone();
        blocking(move || {
            let shortcut = runner::short_circuit(&net, &cfg).map_err(ApiError::config)?;
            let stored = match shortcut {
                Some(run) => {
                    let record = runner::optimize_record(&case, &cfg, run).map_err(ApiError::store)?;
                    store.store_run(&record).map_err(ApiError::store)?;
                    true
                }
                None => false,
            };
            Ok((net, cfg, stored))
        })
        .await?
    };
    if immediate {
        return Ok((StatusCode::OK, Json(state.0.jobs.completed("optimize", &id, &run_id, total))));
    }

    let handle = state.0.jobs.submit("optimize", &id, &run_id, total).map_err(conflict)?;
    let case = id.clone();
    state.spawn(handle.id.clone(), move |progress| {
        let run = runner::optimize(&net, &cfg, progress)?;
        runner::optimize_record(&case, &cfg, run)
    });
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn screen(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobHandle>)> {
    let net = state.network(&id).await?;
    let req: ScreenRequest = parse_body(&body).map_err(ApiError::body)?;
    let cfg = req.normalize(&net).map_err(ApiError::config)?;
    let run_id = cfg.run_id(&id).map_err(ApiError::store)?;
    let total = net.lines().iter().filter(|l| l.in_service).count();
    if state.0.store.contains(&run_id) {
        return Ok((StatusCode::OK, Json(state.0.jobs.completed("screening", &id, &run_id, total))));
    }
    let handle = state.0.jobs.submit("screening", &id, &run_id, total).map_err(conflict)?;
    let case = id.clone();
    state.spawn(handle.id.clone(), move |progress| {
        let report = runner::screen(&net, &cfg, progress)?;
        runner::screen_record(&case, &cfg, report)
    });
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

fn conflict(existing: JobHandle) -> ApiError {
    ApiError {
        job: Some(existing),
        ..ApiError::new(StatusCode::CONFLICT, "an identical job is already in flight")
    }
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobHandle>> {
    state
        .0
        .jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("job {id} not found")))
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobHandle>> {
    Json(state.0.jobs.list())
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = state.0.store.clone();
    let bytes = blocking(move || store.record_bytes(&id).map_err(ApiError::store)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn list_runs(State(state): State<AppState>) -> ApiResult<Response> {
    let entries = state.0.store.list().map_err(ApiError::store)?;
    Ok(Json(entries).into_response())
}

pub fn router(state: AppState, cfg: &ServiceConfig) -> Router {
    Router::new()
        .route("/cases", post(upload_case))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/optimize", post(optimize))
        .route("/cases/{id}/screen", post(screen))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(get_run))
        .layer(DefaultBodyLimit::max(cfg.max_body_bytes))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: RunStore, cfg: ServiceConfig) -> std::io::Result<()> {
    let app = router(AppState::new(store, &cfg), &cfg);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
