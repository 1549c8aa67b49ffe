//! REST surface over [`App`].
//!
//! Errors are JSON bodies `{"error": "ERR_*", "message": ..., "index"?: n}`
//! with the status from [`ErrorCode::http_status`]. Human callers send
//! `Authorization: Bearer <token>`; the ingest endpoint takes the project
//! api key as the bare header value.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::header::{self, HeaderMap, HeaderValue};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::annotation::{AssignmentPatch, Category, SegmentPatch, DEFAULT_PAGE_SIZE};
use crate::app::App;
use crate::auth::Principal;
use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::ingest::{IngestRequest, PreAnnotation};
use crate::qa::OverlapRequest;
use crate::text::normalize_bytes;

type Shared = Arc<App>;

/// Extra room on top of the audio cap for the other multipart fields, so an
/// oversized file is still reported by the audio validator.
const MULTIPART_SLACK: u64 = 1024 * 1024;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = StatusCode::from_u16(e.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let message = if e.code == ErrorCode::Internal {
            tracing::error!(error = %e.message, "request failed");
            "internal error"
        } else {
            e.message.as_str()
        };
        let body = ErrorBody { error: e.code.as_str(), message, index: e.index };
        let mut resp = (status, Json(body)).into_response();
        match e.code {
            ErrorCode::Unauthenticated => {
                resp.headers_mut().insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            }
            ErrorCode::Range => {
                if let Ok(v) = HeaderValue::from_str(&e.message) {
                    resp.headers_mut().insert(header::CONTENT_RANGE, v);
                }
            }
            _ => {}
        }
        resp
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Runs a service call off the async executor; password hashing and store
/// persistence both block.
async fn blocking<T, F>(app: &Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&App) -> Result<T> + Send + 'static,
{
    let app = Arc::clone(app);
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| Error::internal(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

fn bearer_token(headers: &HeaderMap) -> Result<String> {
    let value = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(Error::unauthenticated)?;
    let (scheme, token) = value.trim().split_once(' ').ok_or_else(Error::unauthenticated)?;
    if !scheme.eq_ignore_ascii_case("bearer") || token.trim().is_empty() {
        return Err(Error::unauthenticated());
    }
    Ok(token.trim().to_owned())
}

/// A verified bearer-token caller.
pub struct Auth(pub Principal);

impl FromRequestParts<Shared> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Shared) -> ApiResult<Self> {
        let token = bearer_token(&parts.headers)?;
        Ok(Auth(app.verify(&token)?))
    }
}

/// A JSON body whose rejections use the API error shape.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned> FromRequest<Shared> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &Shared) -> ApiResult<Self> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(JsonRejection::BytesRejection(r)) if r.status() == StatusCode::PAYLOAD_TOO_LARGE => {
                Err(Error::new(ErrorCode::TooLarge, "request body too large").into())
            }
            Err(r) => Err(Error::bad_request(r.body_text()).into()),
        }
    }
}

fn parse_id<T: FromStr>(what: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::not_found(what))
}

fn query_num<T: FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match q.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::bad_request(format!("query parameter {key} is not a valid number"))),
    }
}

pub fn router(app: Shared) -> Router {
    let body_limit = app.settings().max_upload_bytes.saturating_add(MULTIPART_SLACK);
    let body_limit = usize::try_from(body_limit).unwrap_or(usize::MAX);
    Router::new()
        .route("/auth/login", post(login))
        .route("/auth/logout", delete(logout))
        .route("/users", post(create_user).get(list_users))
        .route("/users/{id}", patch(update_user).delete(delete_user))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", patch(rename_project).delete(delete_project))
        .route("/projects/{id}/users", post(add_member))
        .route("/projects/{id}/labels", post(create_label).get(project_schema))
        .route("/projects/{id}/api_key", post(rotate_api_key))
        .route("/projects/{id}/data", get(list_datapoints))
        .route("/projects/{id}/export", get(export_project))
        .route("/projects/{id}/qa/wer", get(qa_report))
        .route("/projects/{id}/qa/plan", post(qa_plan))
        .route("/labels/{id}", delete(delete_label))
        .route("/labels/{id}/values", post(create_label_value))
        .route("/values/{id}", delete(delete_label_value))
        .route("/api/data", post(ingest))
        .route("/data/{id}", get(get_datapoint).patch(update_assignment))
        .route("/data/{id}/segments", post(create_segment))
        .route("/data/{id}/assignments", post(assign_datapoint))
        .route("/segments/{id}", patch(update_segment).delete(delete_segment))
        .route("/assignments/{id}/transcript", get(assignment_transcript))
        .route("/audio/{stored_name}", get(audio))
        .fallback(|| async { ApiError(Error::not_found("route")) })
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(app)
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

async fn login(State(app): State<Shared>, Body(b): Body<LoginBody>) -> ApiResult<impl IntoResponse> {
    let token = blocking(&app, move |app| app.login(&b.username, &b.password)).await?;
    Ok(Json(token))
}

async fn logout(State(app): State<Shared>, headers: HeaderMap) -> ApiResult<StatusCode> {
    let token = bearer_token(&headers)?;
    app.logout(&token)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct NewUser {
    username: String,
    password: String,
    #[serde(default = "default_role")]
    role: Role,
}

fn default_role() -> Role {
    Role::Annotator
}

async fn create_user(State(app): State<Shared>, Auth(p): Auth, Body(b): Body<NewUser>) -> ApiResult<impl IntoResponse> {
    let user = blocking(&app, move |app| app.create_user(&p, &b.username, &b.password, b.role)).await?;
    Ok((StatusCode::CREATED, Json(user)))
}

async fn list_users(State(app): State<Shared>, Auth(p): Auth) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.list_users(&p)?))
}

#[derive(Deserialize)]
struct RoleChange {
    role: Role,
}

async fn update_user(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<RoleChange>) -> ApiResult<impl IntoResponse> {
    let id: UserId = parse_id("user", &id)?;
    Ok(Json(blocking(&app, move |app| app.update_user_role(&p, id, b.role)).await?))
}

async fn delete_user(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id: UserId = parse_id("user", &id)?;
    blocking(&app, move |app| app.delete_user(&p, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct Named {
    name: String,
}

async fn create_project(State(app): State<Shared>, Auth(p): Auth, Body(b): Body<Named>) -> ApiResult<impl IntoResponse> {
    let project = blocking(&app, move |app| app.create_project(&p, &b.name)).await?;
    Ok((StatusCode::CREATED, Json(project)))
}

async fn list_projects(State(app): State<Shared>, Auth(p): Auth) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.list_projects(&p)?))
}

async fn rename_project(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<Named>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    Ok(Json(blocking(&app, move |app| app.rename_project(&p, id, &b.name)).await?))
}

async fn delete_project(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id: ProjectId = parse_id("project", &id)?;
    blocking(&app, move |app| app.delete_project(&p, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct MemberBody {
    user_id: UserId,
}

async fn add_member(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<MemberBody>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    Ok(Json(blocking(&app, move |app| app.assign_user_to_project(&p, b.user_id, id)).await?))
}

#[derive(Deserialize)]
struct NewLabel {
    name: String,
    selection_type: SelectionType,
}

async fn create_label(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<NewLabel>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    let label = blocking(&app, move |app| app.create_label(&p, id, &b.name, b.selection_type)).await?;
    Ok((StatusCode::CREATED, Json(label)))
}

async fn project_schema(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    Ok(Json(app.project_schema(&p, id)?))
}

async fn rotate_api_key(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    Ok(Json(blocking(&app, move |app| app.regenerate_api_key(&p, id)).await?))
}

async fn delete_label(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id: LabelId = parse_id("label", &id)?;
    blocking(&app, move |app| app.delete_label(&p, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct NewValue {
    value: String,
}

async fn create_label_value(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<NewValue>) -> ApiResult<impl IntoResponse> {
    let id: LabelId = parse_id("label", &id)?;
    let value = blocking(&app, move |app| app.create_label_value(&p, id, &b.value)).await?;
    Ok((StatusCode::CREATED, Json(value)))
}

async fn delete_label_value(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id: LabelValueId = parse_id("label value", &id)?;
    blocking(&app, move |app| app.delete_label_value(&p, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> Error {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        Error::new(ErrorCode::TooLarge, "upload exceeds the size limit")
    } else {
        Error::bad_request(format!("malformed multipart body: {}", e.body_text()))
    }
}

fn parse_flag(raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "false" | "0" => Ok(false),
        "true" | "1" => Ok(true),
        other => Err(Error::bad_request(format!("is_marked_for_review must be a boolean, got {other:?}"))),
    }
}

async fn ingest(State(app): State<Shared>, headers: HeaderMap, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let api_key = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .unwrap_or_default()
        .to_owned();
    app.check_api_key(&api_key)?;

    let mut req = IngestRequest { api_key, ..IngestRequest::default() };
    let mut audio = None;
    let mut part_filename = None;
    let mut original_filename = None;
    while let Some(field) = form.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_owned();
        if name == "audio_file" {
            part_filename = field.file_name().map(str::to_owned);
            audio = Some(field.bytes().await.map_err(multipart_error)?);
            continue;
        }
        let raw = field.bytes().await.map_err(multipart_error)?;
        let text = normalize_bytes(&raw)?;
        match name.as_str() {
            "original_filename" => original_filename = Some(text),
            "reference_transcription" => req.reference_transcription = Some(text),
            "segmentations" if !text.trim().is_empty() => {
                req.pre_annotations = serde_json::from_str::<Vec<PreAnnotation>>(&text)
                    .map_err(|e| Error::new(ErrorCode::BadPreannotation, format!("segmentations: {e}")))?;
            }
            "assigned_users" if !text.trim().is_empty() => {
                req.assignees = serde_json::from_str::<Vec<String>>(&text)
                    .map_err(|e| Error::bad_request(format!("assigned_users: {e}")))?;
            }
            "is_marked_for_review" => req.marked_for_review = parse_flag(&text)?,
            _ => {}
        }
    }
    req.audio = audio.ok_or_else(|| Error::bad_request("missing audio_file part"))?.to_vec();
    req.original_filename = original_filename
        .or(part_filename)
        .ok_or_else(|| Error::bad_request("missing original_filename"))?;
    let outcome = blocking(&app, move |app| app.ingest_datapoint(req)).await?;
    Ok((StatusCode::CREATED, Json(outcome)))
}

async fn list_datapoints(
    State(app): State<Shared>,
    Auth(p): Auth,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    let category: Category = q.get("category").map(String::as_str).unwrap_or("").parse()?;
    let page = query_num(&q, "page")?.unwrap_or(1);
    let page_size = query_num(&q, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    Ok(Json(app.list_datapoints(&p, id, category, page, page_size)?))
}

async fn get_datapoint(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id: DataPointId = parse_id("datapoint", &id)?;
    Ok(Json(app.get_datapoint(&p, id)?))
}

async fn update_assignment(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<AssignmentPatch>) -> ApiResult<impl IntoResponse> {
    let id: DataPointId = parse_id("datapoint", &id)?;
    Ok(Json(blocking(&app, move |app| app.update_assignment(&p, id, b)).await?))
}

async fn create_segment(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<SegmentDraft>) -> ApiResult<impl IntoResponse> {
    let id: DataPointId = parse_id("datapoint", &id)?;
    let seg = blocking(&app, move |app| app.create_segment(&p, id, b)).await?;
    Ok((StatusCode::CREATED, Json(seg)))
}

#[derive(Deserialize)]
struct AssignBody {
    username: String,
}

async fn assign_datapoint(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<AssignBody>) -> ApiResult<impl IntoResponse> {
    let id: DataPointId = parse_id("datapoint", &id)?;
    let a = blocking(&app, move |app| app.assign_datapoint(&p, id, &b.username)).await?;
    Ok((StatusCode::CREATED, Json(a)))
}

async fn update_segment(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<SegmentPatch>) -> ApiResult<impl IntoResponse> {
    let id: SegmentId = parse_id("segment", &id)?;
    Ok(Json(blocking(&app, move |app| app.update_segment(&p, id, b)).await?))
}

async fn delete_segment(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id: SegmentId = parse_id("segment", &id)?;
    blocking(&app, move |app| app.delete_segment(&p, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Serialize)]
struct Transcript {
    assignment_id: AssignmentId,
    transcript: String,
}

async fn assignment_transcript(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let assignment_id: AssignmentId = parse_id("assignment", &id)?;
    let transcript = app.assignment_transcript(&p, assignment_id)?;
    Ok(Json(Transcript { assignment_id, transcript }))
}

async fn audio(State(app): State<Shared>, Auth(p): Auth, Path(stored_name): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let range = headers.get(header::RANGE).and_then(|v| v.to_str().ok()).map(str::to_owned);
    let resp = blocking(&app, move |app| app.serve_audio(&p, &stored_name, range.as_deref())).await?;
    let status = StatusCode::from_u16(resp.status()).unwrap_or(StatusCode::OK);
    let mut out = (status, resp.bytes).into_response();
    let h = out.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(resp.content_type));
    h.insert(header::ACCEPT_RANGES, HeaderValue::from_static("bytes"));
    if let Some(cr) = resp.range.map(|(a, b)| format!("bytes {a}-{b}/{}", resp.total_len)) {
        h.insert(header::CONTENT_RANGE, HeaderValue::from_str(&cr).map_err(|e| Error::internal(e.to_string()))?);
    }
    Ok(out)
}

async fn export_project(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>) -> ApiResult<Response> {
    let id: ProjectId = parse_id("project", &id)?;
    let body = app.export_project_json(&p, id)?;
    let disposition = format!("attachment; filename=\"project-{id}.json\"");
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (header::CONTENT_DISPOSITION, HeaderValue::from_str(&disposition).map_err(|e| Error::internal(e.to_string()))?),
        ],
        body,
    )
        .into_response())
}

async fn qa_report(
    State(app): State<Shared>,
    Auth(p): Auth,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    let user = |k: &str| {
        q.get(k)
            .filter(|s| !s.trim().is_empty())
            .cloned()
            .ok_or_else(|| Error::bad_request(format!("query parameter {k} is required")))
    };
    let (a, b) = (user("user_a")?, user("user_b")?);
    let threshold = query_num(&q, "threshold")?;
    Ok(Json(app.qa_report(&p, id, &a, &b, threshold)?))
}

async fn qa_plan(State(app): State<Shared>, Auth(p): Auth, Path(id): Path<String>, Body(b): Body<OverlapRequest>) -> ApiResult<impl IntoResponse> {
    let id: ProjectId = parse_id("project", &id)?;
    Ok(Json(blocking(&app, move |app| app.plan_project_overlap(&p, id, b)).await?))
}
