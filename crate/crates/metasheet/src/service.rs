//! HTTP facade over validation, suggestion, repair and template management.
//!
//! Routes:
//!
//! | method | path | body / response |
//! |---|---|---|
//! | GET | `/health` | build version and terminology mode |
//! | GET | `/templates` | summaries of registered templates |
//! | GET, PUT | `/templates/{id}` | template document |
//! | GET | `/templates/{id}/spreadsheet?format=tsv\|xlsx&rows=N` | blank sheet |
//! | GET | `/templates/{id}/spec` | Markdown rendering |
//! | POST | `/validate` | sheet upload; report JSON, session id in `x-session-id` |
//! | POST | `/suggest` | `{"session_id"}`; groups with ranked suggestions |
//! | POST | `/repair` | `{"session_id","actions"}`; repaired file + fresh report |
//!
//! `/validate` accepts either a multipart form (`file`, optional `format`,
//! optional `template_id`) or the raw sheet as the body with the same
//! options as query parameters.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::Path as FsPath;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE};
use axum::http::{HeaderName, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use metasheet_core::{
    apply_repairs, fill_suggestions, parse_template, render_spec, validate_table, IssueGroup,
    RepairAction, RepairError, SuggestConfig, Table, Template, TemplateError, ValidationReport,
    ValueSet,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::format::{read_sheet, write_sheet, SheetFormat};
use crate::pipeline::{self, PipelineError};
use crate::store::TemplateStore;
use crate::terminology::{TerminologyClient, TerminologyError};

pub const SESSION_HEADER: &str = "x-session-id";
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(60 * 60);
pub const DEFAULT_MAX_UPLOAD: usize = 20 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    pub max_upload: usize,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
    pub suggest: SuggestConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session_ttl: DEFAULT_SESSION_TTL,
            max_upload: DEFAULT_MAX_UPLOAD,
            cors_origin: None,
            suggest: SuggestConfig::default(),
        }
    }
}

/// An uploaded sheet and its latest validation.
#[derive(Debug, Clone)]
pub struct Session {
    pub template: Arc<Template>,
    pub format: SheetFormat,
    pub filename: Option<String>,
    pub bytes: Vec<u8>,
    pub table: Table,
    pub report: ValidationReport,
    pub sets: BTreeMap<String, ValueSet>,
}

struct Slot {
    session: Arc<tokio::sync::Mutex<Session>>,
    last_used: Instant,
}

/// Sessions keyed by random id, expiring `ttl` after last use. Each session
/// sits behind its own async mutex so repairs on one session serialize.
pub struct SessionStore {
    ttl: Duration,
    slots: Mutex<HashMap<String, Slot>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut slots = self.slots.lock().expect("session lock");
        let ttl = self.ttl;
        slots.retain(|_, s| s.last_used.elapsed() < ttl);
        slots.insert(
            id.clone(),
            Slot {
                session: Arc::new(tokio::sync::Mutex::new(session)),
                last_used: Instant::now(),
            },
        );
        id
    }

    pub fn get(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        let mut slots = self.slots.lock().expect("session lock");
        let expired = slots.get(id)?.last_used.elapsed() >= self.ttl;
        if expired {
            slots.remove(id);
            return None;
        }
        let slot = slots.get_mut(id)?;
        slot.last_used = Instant::now();
        Some(slot.session.clone())
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("session lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<TemplateStore>,
    pub terminology: Arc<TerminologyClient>,
    pub sessions: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(store: TemplateStore, terminology: TerminologyClient, config: ServiceConfig) -> Self {
        Self {
            store: Arc::new(store),
            terminology: Arc::new(terminology),
            sessions: Arc::new(SessionStore::new(config.session_ttl)),
            config: Arc::new(config),
        }
    }
}

/// JSON error body: `{"error": "...", "details": [...]}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.details.push(detail.into());
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.message, "details": self.details});
        (self.status, Json(body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Terminology(TerminologyError::NotConfigured(_)) => {
                ApiError::internal(e.to_string())
            }
            PipelineError::Terminology(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            PipelineError::Validate(_) | PipelineError::Workbook(_) => ApiError::internal(e.to_string()),
        }
    }
}

fn template_error(e: &TemplateError) -> ApiError {
    let detail = match e {
        TemplateError::Syntax { line, column, message } => format!("line {line}, column {column}: {message}"),
        TemplateError::Schema { path, message } => format!("{path}: {message}"),
    };
    ApiError::bad_request("invalid template document").with_detail(detail)
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::PUT, Method::POST])
        .allow_headers([CONTENT_TYPE])
        .expose_headers([HeaderName::from_static(SESSION_HEADER), CONTENT_DISPOSITION])
        .allow_origin(match &state.config.cors_origin {
            Some(origin) => match HeaderValue::from_str(origin) {
                Ok(v) => AllowOrigin::exact(v),
                Err(_) => AllowOrigin::any(),
            },
            None => AllowOrigin::any(),
        });
    let limit = state.config.max_upload;
    Router::new()
        .route("/health", get(health))
        .route("/templates", get(list_templates))
        .route("/templates/{id}", get(get_template).put(put_template))
        .route("/templates/{id}/spreadsheet", get(template_spreadsheet))
        .route("/templates/{id}/spec", get(template_spec))
        .route("/validate", post(validate))
        .route("/suggest", post(suggest))
        .route("/repair", post(repair))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, mode = %state.terminology.mode(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "terminology_mode": state.terminology.mode().as_str(),
        "templates": state.store.list().len(),
    }))
}

#[derive(Serialize)]
struct TemplateSummary {
    id: String,
    name: String,
    version: String,
    fields: usize,
}

async fn list_templates(State(state): State<AppState>) -> Json<Vec<TemplateSummary>> {
    Json(
        state
            .store
            .list()
            .iter()
            .map(|t| TemplateSummary {
                id: t.id.clone(),
                name: t.name.clone(),
                version: t.version.clone(),
                fields: t.fields.len(),
            })
            .collect(),
    )
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<Template>, ApiError> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown template `{id}`")))
}

async fn get_template(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let t = lookup(&state, &id)?;
    Ok(Json(&*t).into_response())
}

async fn put_template(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let template = parse_template(&body).map_err(|e| template_error(&e))?;
    if template.id != id {
        return Err(ApiError::bad_request("template id does not match the URL")
            .with_detail(format!("id: document has `{}`, path has `{id}`", template.id)));
    }
    let store = state.store.clone();
    let stored = template.clone();
    let created = blocking(move || store.put(stored).map_err(|e| ApiError::internal(e.to_string()))).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(template)).into_response())
}

#[derive(Deserialize)]
struct SpreadsheetQuery {
    format: Option<String>,
    rows: Option<usize>,
}

async fn template_spreadsheet(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SpreadsheetQuery>,
) -> Result<Response, ApiError> {
    let template = lookup(&state, &id)?;
    let format = match q.format.as_deref() {
        None => SheetFormat::Tsv,
        Some(f) => f.parse::<SheetFormat>().map_err(ApiError::bad_request)?,
    };
    let rows = q.rows.unwrap_or_else(|| pipeline::default_rows(format));
    let terminology = state.terminology.clone();
    let t = template.clone();
    let bytes = blocking(move || Ok(pipeline::generate_blank(&t, format, rows, &terminology)?)).await?;
    Ok(file_response(bytes, format, &format!("{}.{}", template.id, format.as_str())))
}

async fn template_spec(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let template = lookup(&state, &id)?;
    let terminology = state.terminology.clone();
    let t = template.clone();
    // unresolvable terminology sets are rendered by reference only
    let sets = blocking(move || Ok(terminology.resolve_template_sets(&t).unwrap_or_default())).await?;
    let md = render_spec(&template, &sets);
    Ok(([(CONTENT_TYPE, "text/markdown; charset=utf-8")], md).into_response())
}

fn file_response(bytes: Vec<u8>, format: SheetFormat, filename: &str) -> Response {
    let disposition = format!("attachment; filename=\"{}\"", filename.replace('"', ""));
    (
        [
            (CONTENT_TYPE, format.content_type().to_string()),
            (CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response()
}

#[derive(Debug, Default, Deserialize)]
struct UploadOptions {
    format: Option<String>,
    template_id: Option<String>,
    filename: Option<String>,
}

struct Upload {
    bytes: Vec<u8>,
    options: UploadOptions,
}

async fn read_upload(state: &AppState, req: Request) -> Result<Upload, ApiError> {
    let is_multipart = req
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if !is_multipart {
        let options = Query::<UploadOptions>::try_from_uri(req.uri())
            .map(|q| q.0)
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        return Ok(Upload {
            bytes: bytes.to_vec(),
            options,
        });
    }
    let mut multipart = Multipart::from_request(req, state)
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let mut options = UploadOptions::default();
    let mut file = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "file" => {
                if options.filename.is_none() {
                    options.filename = field.file_name().map(String::from);
                }
                let data = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
                file = Some(data.to_vec());
            }
            "format" | "template_id" | "filename" => {
                let text = field.text().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
                let text = Some(text.trim().to_string()).filter(|t| !t.is_empty());
                match name.as_str() {
                    "format" => options.format = text,
                    "template_id" => options.template_id = text,
                    _ => options.filename = text,
                }
            }
            _ => {}
        }
    }
    let bytes = file.ok_or_else(|| ApiError::bad_request("multipart upload needs a `file` field"))?;
    Ok(Upload { bytes, options })
}

fn upload_format(options: &UploadOptions, bytes: &[u8]) -> Result<SheetFormat, ApiError> {
    if let Some(f) = &options.format {
        return f.parse().map_err(ApiError::bad_request);
    }
    Ok(options
        .filename
        .as_deref()
        .and_then(|n| SheetFormat::from_path(FsPath::new(n)))
        .unwrap_or_else(|| SheetFormat::sniff(bytes)))
}

async fn validate(State(state): State<AppState>, req: Request) -> Result<Response, ApiError> {
    let upload = read_upload(&state, req).await?;
    let format = upload_format(&upload.options, &upload.bytes)?;
    let bytes = upload.bytes;
    let parsed = bytes.clone();
    let table = blocking(move || {
        read_sheet(&parsed, format).map_err(|e| {
            ApiError::bad_request(format!("malformed {format} spreadsheet")).with_detail(e.to_string())
        })
    })
    .await?;

    let template_id = upload
        .options
        .template_id
        .clone()
        .or_else(|| table.provenance.clone())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "template not identified: the sheet carries no provenance and no template_id was given",
            )
        })?;
    let template = lookup(&state, &template_id)?;

    let terminology = state.terminology.clone();
    let (t, tbl) = (template.clone(), table.clone());
    let (mut report, sets) = blocking(move || Ok(pipeline::validate(&t, &tbl, &terminology)?)).await?;
    report.generated_at = Some(pipeline::now_stamp());

    let session_id = state.sessions.insert(Session {
        template,
        format,
        filename: upload.options.filename,
        bytes,
        table,
        report: report.clone(),
        sets,
    });
    let mut resp = Json(report).into_response();
    resp.headers_mut().insert(
        HeaderName::from_static(SESSION_HEADER),
        HeaderValue::from_str(&session_id).expect("uuid is a valid header"),
    );
    Ok(resp)
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("malformed request body").with_detail(e.to_string()))
}

#[derive(Deserialize)]
struct SuggestRequest {
    session_id: String,
}

#[derive(Serialize)]
pub struct SuggestResponse {
    pub session_id: String,
    pub groups: Vec<IssueGroup>,
}

fn session(state: &AppState, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown or expired session `{id}`")))
}

async fn suggest(State(state): State<AppState>, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    let req: SuggestRequest = parse_json(&body)?;
    let slot = session(&state, &req.session_id)?;
    let s = slot.lock().await;
    let mut report = s.report.clone();
    fill_suggestions(&mut report, &s.template, &s.sets, &state.config.suggest);
    Ok(Json(SuggestResponse {
        session_id: req.session_id,
        groups: report.groups,
    }))
}

#[derive(Deserialize)]
struct RepairRequest {
    session_id: String,
    #[serde(default)]
    actions: Vec<RepairAction>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RepairResponse {
    pub session_id: String,
    pub format: SheetFormat,
    pub filename: Option<String>,
    /// Base64 of the repaired file, in the uploaded format.
    pub file_base64: String,
    pub report: ValidationReport,
}

async fn repair(State(state): State<AppState>, body: Bytes) -> Result<Json<RepairResponse>, ApiError> {
    let req: RepairRequest = parse_json(&body)?;
    let slot = session(&state, &req.session_id)?;
    let mut s = slot.lock().await;

    let repaired = apply_repairs(&s.table, &s.report, &req.actions).map_err(|e| match e {
        RepairError::Conflict { .. } => ApiError::new(StatusCode::CONFLICT, "conflicting repair actions").with_detail(e.to_string()),
        _ => ApiError::bad_request("malformed repair action").with_detail(e.to_string()),
    })?;

    let (bytes, mut report) = if repaired == s.table {
        (s.bytes.clone(), s.report.clone())
    } else {
        let bytes = write_sheet(&repaired, s.format).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let report = validate_table(&s.template, &repaired, &s.sets)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        (bytes, report)
    };
    report.generated_at = Some(pipeline::now_stamp());

    s.table = repaired;
    s.bytes = bytes.clone();
    s.report = report.clone();
    Ok(Json(RepairResponse {
        session_id: req.session_id,
        format: s.format,
        filename: s.filename.clone(),
        file_base64: base64::engine::general_purpose::STANDARD.encode(&bytes),
        report,
    }))
}
