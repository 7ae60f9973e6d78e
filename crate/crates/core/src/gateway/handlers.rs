use std::collections::HashMap;
use std::str::FromStr;

use axum::body::{Body, Bytes};
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::header;
use axum::http::request::Parts;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::envelope::{data, paged, ApiError, Reply, SESSION_COOKIE};
use crate::assets::{AssetPatch, NewAsset, NewPropertyDefinition};
use crate::csvio::MAX_UPLOAD_BYTES;
use crate::error::{Error, Result};
use crate::error_reports::ErrorConstraints;
use crate::page::PageRequest;
use crate::render::ExportFormat;
use crate::requests::{Fulfillment, NewRequest};
use crate::review::{AuditFilter, ReportSpec, ReviewSource};
use crate::search::{Query as SearchQuery, SearchParameter, SearchTarget};
use crate::service::Uuis;
use crate::store::Severity;
use crate::university::{NewLocation, RoleChange};

type Handled = std::result::Result<Reply, ApiError>;
type Params = Query<HashMap<String, String>>;

/// The session token, from a bearer header or the session cookie.
pub struct Token(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Token {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> std::result::Result<Self, ApiError> {
        let bearer = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(|t| t.trim().to_string());
        let cookie = || {
            parts.headers.get_all(header::COOKIE).iter().filter_map(|v| v.to_str().ok()).find_map(|v| {
                v.split(';').find_map(|kv| {
                    let (k, val) = kv.trim().split_once('=')?;
                    (k == SESSION_COOKIE).then(|| val.to_string())
                })
            })
        };
        match bearer.or_else(cookie).filter(|t| !t.is_empty()) {
            Some(t) => Ok(Token(t)),
            None => Err(Error::Unauthenticated.into()),
        }
    }
}

/// A numeric `{id}` path segment.
pub struct Id(pub i64);

impl<S: Send + Sync> FromRequestParts<S> for Id {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> std::result::Result<Self, ApiError> {
        Path::<i64>::from_request_parts(parts, state)
            .await
            .map(|Path(id)| Id(id))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// A request body of at most [`MAX_UPLOAD_BYTES`].
pub struct Payload(pub Bytes);

impl<S: Send + Sync> FromRequest<S> for Payload {
    type Rejection = ApiError;

    async fn from_request(req: Request, _: &S) -> std::result::Result<Self, ApiError> {
        let declared = req
            .headers()
            .get(header::CONTENT_LENGTH)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<usize>().ok());
        let too_large = |size: usize| ApiError::from(Error::TooLarge { size, limit: MAX_UPLOAD_BYTES });
        if let Some(n) = declared.filter(|&n| n > MAX_UPLOAD_BYTES) {
            return Err(too_large(n));
        }
        let body: Body = req.into_body();
        axum::body::to_bytes(body, MAX_UPLOAD_BYTES)
            .await
            .map(Payload)
            .map_err(|_| too_large(declared.unwrap_or(MAX_UPLOAD_BYTES + 1)))
    }
}

impl Payload {
    /// Parses JSON; an empty body reads as `{}`.
    fn json<T: DeserializeOwned>(&self) -> std::result::Result<T, ApiError> {
        let bytes: &[u8] = if self.0.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &self.0 };
        serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
    }
}

/// Runs a service call off the async workers. Internal failures reach the
/// client only as `internal`; the store has already filed them, and panics
/// are filed here.
async fn run<T, F>(u: &Uuis, f: F) -> std::result::Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Uuis) -> Result<T> + Send + 'static,
{
    let svc = u.clone();
    match tokio::task::spawn_blocking(move || f(&svc)).await {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.into()),
        Err(join) => {
            u.report("gateway", Severity::Critical, "request handler panicked".into(), Some(join.to_string()), None);
            Err(ApiError::internal())
        }
    }
}

fn page_of(q: &HashMap<String, String>) -> std::result::Result<PageRequest, ApiError> {
    let num = |k: &str| -> std::result::Result<Option<usize>, ApiError> {
        q.get(k)
            .map(|v| v.trim().parse::<usize>().map_err(|_| ApiError::bad_request(format!("`{k}` must be a non-negative integer"))))
            .transpose()
    };
    Ok(PageRequest { index: num("page")?.unwrap_or(0), size: num("size")? })
}

fn format_of(q: &HashMap<String, String>) -> std::result::Result<Option<ExportFormat>, ApiError> {
    q.get("format")
        .map(|f| ExportFormat::from_str(f).map_err(|_| ApiError::bad_request(format!("unsupported export format `{f}`"))))
        .transpose()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginBody {
    user_code: String,
    password: String,
    #[serde(default)]
    role_id: Option<i64>,
}

pub async fn login(State(u): State<Uuis>, body: Payload) -> Handled {
    let b: LoginBody = body.json()?;
    let s = run(&u, move |u| u.login(&b.user_code, &b.password, b.role_id)).await?;
    let token = s.session_id.clone();
    let level = s.acting_role.level();
    let mut v = serde_json::to_value(s).unwrap_or(Value::Null);
    v["level"] = json!(level);
    Ok(Reply::Login(v, token))
}

pub async fn logout(State(u): State<Uuis>, Token(t): Token) -> Handled {
    run(&u, move |u| u.logout(&t)).await?;
    Ok(data(json!({ "logged_out": true })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PasswordBody {
    current: String,
    new: String,
    confirm: String,
}

pub async fn password(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: PasswordBody = body.json()?;
    run(&u, move |u| u.change_password(&t, &b.current, &b.new, &b.confirm)).await?;
    Ok(data(json!({ "changed": true })))
}

pub async fn profile(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.view_personal_info(&t)).await?))
}

pub async fn update_profile(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let patch: Map<String, Value> = body.json()?;
    Ok(data(run(&u, move |u| u.update_personal_info(&t, &patch)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BasicBody {
    target: SearchTarget,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvancedBody {
    target: SearchTarget,
    parameters: Vec<SearchParameter>,
    #[serde(default)]
    expression: Option<String>,
}

pub async fn search_basic(State(u): State<Uuis>, Token(t): Token, Query(q): Params, body: Payload) -> Handled {
    let b: BasicBody = body.json()?;
    let page = page_of(&q)?;
    match format_of(&q)? {
        Some(format) => Ok(Reply::Doc(
            run(&u, move |u| {
                let query = u.capture_basic(&t, &b.text)?;
                let plan = u.compile(&t, &SearchQuery::Basic(query), b.target)?;
                u.export_results(&t, &plan, format)
            })
            .await?,
        )),
        None => {
            let out = run(&u, move |u| u.search_basic(&t, b.target, &b.text, page)).await?;
            let p = super::envelope::Pagination::of(&out.page);
            Ok(Reply::Page(json!({ "query": out.query, "plan": out.plan, "rows": out.page.rows }), p))
        }
    }
}

pub async fn search_advanced(State(u): State<Uuis>, Token(t): Token, Query(q): Params, body: Payload) -> Handled {
    let b: AdvancedBody = body.json()?;
    let page = page_of(&q)?;
    match format_of(&q)? {
        Some(format) => Ok(Reply::Doc(
            run(&u, move |u| {
                let query = u.capture_advanced(&t, b.target, b.parameters, b.expression.as_deref())?;
                let plan = u.compile(&t, &SearchQuery::Advanced(query), b.target)?;
                u.export_results(&t, &plan, format)
            })
            .await?,
        )),
        None => {
            let out = run(&u, move |u| u.search_advanced(&t, b.target, b.parameters, b.expression.as_deref(), page)).await?;
            let p = super::envelope::Pagination::of(&out.page);
            Ok(Reply::Page(json!({ "query": out.query, "plan": out.plan, "rows": out.page.rows }), p))
        }
    }
}

pub async fn list_assets(State(u): State<Uuis>, Token(t): Token, Query(q): Params) -> Handled {
    let page = page_of(&q)?;
    match format_of(&q)? {
        Some(format) => Ok(Reply::Doc(
            run(&u, move |u| {
                let plan = u.compile(&t, &SearchQuery::All, SearchTarget::Items)?;
                u.export_results(&t, &plan, format)
            })
            .await?,
        )),
        None => Ok(paged(run(&u, move |u| u.list_assets(&t, page)).await?)),
    }
}

pub async fn add_asset(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let a: NewAsset = body.json()?;
    Ok(data(run(&u, move |u| u.add_asset(&t, a)).await?))
}

pub async fn get_asset(State(u): State<Uuis>, Token(t): Token, Id(id): Id) -> Handled {
    Ok(data(run(&u, move |u| u.get_asset(&t, id)).await?))
}

pub async fn update_asset(State(u): State<Uuis>, Token(t): Token, Id(id): Id, body: Payload) -> Handled {
    let patch: AssetPatch = body.json()?;
    let mut out = run(&u, move |u| u.update_assets(&t, &[id], &patch)).await?;
    Ok(data(out.pop()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchUpdate {
    items: Vec<i64>,
    patch: AssetPatch,
}

pub async fn update_assets(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: BatchUpdate = body.json()?;
    Ok(data(run(&u, move |u| u.update_assets(&t, &b.items, &b.patch)).await?))
}

pub async fn import_assets(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    Ok(data(run(&u, move |u| u.bulk_add_assets(&t, &body.0)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupBody {
    items: Vec<i64>,
}

pub async fn group_assets(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: GroupBody = body.json()?;
    Ok(data(run(&u, move |u| u.group_assets(&t, &b.items)).await?))
}

pub async fn categories(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.categories(&t)).await?))
}

pub async fn define_property(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let d: NewPropertyDefinition = body.json()?;
    Ok(data(run(&u, move |u| u.define_category_property(&t, d)).await?))
}

pub async fn own_requests(State(u): State<Uuis>, Token(t): Token, Query(q): Params) -> Handled {
    let page = page_of(&q)?;
    Ok(paged(run(&u, move |u| u.view_own_requests(&t, page)).await?))
}

pub async fn submit_request(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let r: NewRequest = body.json()?;
    Ok(data(run(&u, move |u| u.submit_request(&t, r)).await?))
}

pub async fn request_types(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.request_types(&t)).await?))
}

pub async fn pending_requests(State(u): State<Uuis>, Token(t): Token, Query(q): Params) -> Handled {
    let page = page_of(&q)?;
    Ok(paged(run(&u, move |u| u.view_pending(&t, page)).await?))
}

pub async fn get_request(State(u): State<Uuis>, Token(t): Token, Id(id): Id) -> Handled {
    Ok(data(run(&u, move |u| u.get_request(&t, id)).await?))
}

pub async fn approve_request(State(u): State<Uuis>, Token(t): Token, Id(id): Id, body: Payload) -> Handled {
    let f: Fulfillment = body.json()?;
    Ok(data(run(&u, move |u| u.approve_request(&t, id, &f)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RejectBody {
    reason: String,
}

pub async fn reject_request(State(u): State<Uuis>, Token(t): Token, Id(id): Id, body: Payload) -> Handled {
    let b: RejectBody = body.json()?;
    Ok(data(run(&u, move |u| u.reject_request(&t, id, &b.reason)).await?))
}

pub async fn cancel_request(State(u): State<Uuis>, Token(t): Token, Id(id): Id) -> Handled {
    Ok(data(run(&u, move |u| u.cancel_request(&t, id)).await?))
}

pub async fn affiliations(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.affiliations(&t)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AffiliationBody {
    name: String,
    code: String,
    #[serde(default)]
    faculty_id: Option<i64>,
}

pub async fn create_faculty(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: AffiliationBody = body.json()?;
    if b.faculty_id.is_some() {
        return Err(ApiError::bad_request("a faculty has no parent faculty"));
    }
    Ok(data(run(&u, move |u| u.create_faculty(&t, &b.name, &b.code)).await?))
}

pub async fn create_department(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: AffiliationBody = body.json()?;
    let faculty = b.faculty_id.ok_or_else(|| ApiError::bad_request("faculty_id is required"))?;
    Ok(data(run(&u, move |u| u.create_department(&t, &b.name, &b.code, faculty)).await?))
}

pub async fn locations(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.locations(&t)).await?))
}

pub async fn add_location(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let l: NewLocation = body.json()?;
    Ok(data(run(&u, move |u| u.add_location(&t, l)).await?))
}

pub async fn import_users(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    Ok(data(run(&u, move |u| u.bulk_import_users(&t, &body.0)).await?))
}

pub async fn update_role(State(u): State<Uuis>, Token(t): Token, Id(id): Id, body: Payload) -> Handled {
    let c: RoleChange = body.json()?;
    Ok(data(run(&u, move |u| u.update_user_role(&t, id, c)).await?))
}

pub async fn list_backups(State(u): State<Uuis>, Token(t): Token) -> Handled {
    Ok(data(run(&u, move |u| u.list_backups(&t)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BackupBody {
    #[serde(default)]
    confirmation: Option<String>,
}

pub async fn trigger_backup(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: BackupBody = body.json()?;
    Ok(data(run(&u, move |u| u.trigger_backup(&t, b.confirmation.as_deref())).await?))
}

/// Outside callers are sent back to the welcome page rather than login.
pub async fn review_options(State(u): State<Uuis>, token: std::result::Result<Token, ApiError>) -> Handled {
    let Token(t) = token.map_err(|e| e.with_redirect("/welcome"))?;
    run(&u, move |u| u.view_audit_options(&t)).await.map(data).map_err(|e| {
        if e.body.code == "unauthenticated" {
            e.with_redirect("/welcome")
        } else {
            e
        }
    })
}

pub async fn review_logs(State(u): State<Uuis>, Token(t): Token, Query(q): Params, body: Payload) -> Handled {
    let filter: AuditFilter = body.json()?;
    let page = page_of(&q)?;
    match format_of(&q)? {
        Some(format) => {
            let source = ReviewSource::Audit { filter, page: Some(page) };
            Ok(Reply::Doc(run(&u, move |u| u.output_review(&t, &source, format)).await?))
        }
        None => Ok(paged(run(&u, move |u| u.audit_logs(&t, &filter, page)).await?)),
    }
}

pub async fn review_reports(State(u): State<Uuis>, Token(t): Token, Query(q): Params, body: Payload) -> Handled {
    let spec: ReportSpec = body.json()?;
    match format_of(&q)? {
        Some(format) => {
            let source = ReviewSource::Report { spec };
            Ok(Reply::Doc(run(&u, move |u| u.output_review(&t, &source, format)).await?))
        }
        None => Ok(data(run(&u, move |u| u.produce_report(&t, &spec)).await?)),
    }
}

pub async fn list_errors(State(u): State<Uuis>, Token(t): Token, Query(q): Params) -> Handled {
    let page = page_of(&q)?;
    let mut map = Map::new();
    for key in ["severity", "source_prefix", "text", "from", "to"] {
        if let Some(v) = q.get(key) {
            map.insert(key.into(), Value::String(v.clone()));
        }
    }
    let constraints: ErrorConstraints =
        serde_json::from_value(Value::Object(map)).map_err(|e| ApiError::bad_request(format!("bad constraint: {e}")))?;
    Ok(paged(run(&u, move |u| u.list_errors(&t, &constraints, page)).await?))
}

pub async fn get_error(State(u): State<Uuis>, Token(t): Token, Id(id): Id) -> Handled {
    Ok(data(run(&u, move |u| u.get_error(&t, id)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PrintBody {
    ids: Vec<i64>,
}

pub async fn print_errors(State(u): State<Uuis>, Token(t): Token, body: Payload) -> Handled {
    let b: PrintBody = body.json()?;
    Ok(Reply::Doc(run(&u, move |u| u.print_errors(&t, &b.ids)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotateBody {
    comment: String,
}

pub async fn annotate_error(State(u): State<Uuis>, Token(t): Token, Id(id): Id, body: Payload) -> Handled {
    let b: AnnotateBody = body.json()?;
    Ok(data(run(&u, move |u| u.annotate_error(&t, id, &b.comment)).await?))
}
