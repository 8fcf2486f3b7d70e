//! Routes and handlers.

use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use consent_core::content::NodeView;
use consent_core::identity::{Account, AccountStatus, SignupDecision};
use consent_core::moderation::QueueView;
use consent_core::vocab::Vocabulary;
use consent_core::{
    AccountId, ConsentBoundary, NodeId, PersonaName, Platform, ThreadId, TraitPatch, TraitProfile,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;

use crate::auth::{password_acceptable, Credential, Credentials, SessionError, Sessions};
use crate::error::{ApiError, ApiResult};
use crate::store::{Snapshot, Store};

pub struct AppState {
    pub platform: Platform,
    credentials: RwLock<Credentials>,
    sessions: Sessions,
    store: Option<Store>,
}

impl AppState {
    pub fn new(platform: Platform, credentials: Credentials, session_request_cap: u64, store: Option<Store>) -> Self {
        AppState {
            platform,
            credentials: RwLock::new(credentials),
            sessions: Sessions::new(session_request_cap),
            store,
        }
    }

    /// Persists the current state, if a data directory is configured.
    fn commit(&self) {
        if let Some(store) = &self.store {
            let take = || Snapshot {
                state: self.platform.snapshot(),
                credentials: self.credentials.read().expect("credentials").clone(),
            };
            if let Err(e) = store.save(take) {
                log::error!("snapshot write failed: {e}");
            }
        }
    }
}

type Shared = State<Arc<AppState>>;

/// The authenticated account behind the request's bearer token.
pub struct Caller(pub AccountId);

impl FromRequestParts<Arc<AppState>> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::UNAUTHENTICATED)?;
        match state.sessions.charge(token.trim()) {
            Ok(account) => Ok(Caller(account)),
            Err(SessionError::Unknown) => Err(ApiError::UNAUTHENTICATED),
            Err(SessionError::CapReached) => Err(ApiError::CAP_REACHED),
        }
    }
}

/// JSON request body; malformed input is a 422 like any other invalid request.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rejection) => {
                log::debug!("rejected body: {rejection}");
                Err(ApiError::invalid("invalid_request"))
            }
        }
    }
}

// Unparseable ids name nothing, so they get the same answer as unknown ones.
fn node_id(raw: &str) -> ApiResult<NodeId> {
    raw.parse().map(NodeId).map_err(|_| ApiError::NOT_FOUND)
}

fn thread_id(raw: &str) -> ApiResult<ThreadId> {
    raw.parse().map(ThreadId).map_err(|_| ApiError::NOT_FOUND)
}

fn account_id(raw: &str) -> ApiResult<AccountId> {
    raw.parse::<AccountId>()
        .or_else(|_| raw.parse().map(AccountId))
        .map_err(|_| ApiError::NOT_FOUND)
}

/// The caller's own account. Contact addresses are never echoed back.
#[derive(Debug, Serialize, Deserialize)]
pub struct AccountView {
    pub account_id: AccountId,
    pub status: AccountStatus,
    pub moderator: bool,
    pub default_persona: PersonaName,
    pub personas: Vec<PersonaName>,
    pub default_boundary: Option<ConsentBoundary>,
    pub traits: TraitProfile,
}

impl From<Account> for AccountView {
    fn from(a: Account) -> Self {
        AccountView {
            account_id: a.id,
            status: a.status,
            moderator: a.moderator,
            default_persona: a.default_persona,
            personas: a.personas.into_iter().collect(),
            default_boundary: a.default_boundary,
            traits: a.profile,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterRequest {
    email: String,
    password: String,
    persona: String,
    #[serde(default)]
    traits: TraitProfile,
}

async fn register(State(app): Shared, Body(req): Body<RegisterRequest>) -> ApiResult<impl IntoResponse> {
    if !password_acceptable(&req.password) {
        return Err(ApiError::invalid("weak_password"));
    }
    let account = app.platform.register(&req.email, req.traits, &req.persona)?;
    let credential = Credential::new(&req.password, app.sessions.rng());
    app.credentials.write().expect("credentials").set(account.id, credential);
    app.commit();
    let body = json!({
        "account_id": account.id,
        "status": account.status,
        "persona": account.default_persona,
    });
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginRequest {
    email: String,
    password: String,
}

async fn login(State(app): Shared, Body(req): Body<LoginRequest>) -> ApiResult<impl IntoResponse> {
    let account = app
        .platform
        .find_account_by_email(&req.email)
        .filter(|a| app.credentials.read().expect("credentials").verify(a.id, &req.password))
        .ok_or(ApiError::BAD_CREDENTIALS)?;
    if !account.is_active() {
        return Err(ApiError {
            status: StatusCode::FORBIDDEN,
            code: "account_not_active",
        });
    }
    let token = app.sessions.open(account.id);
    Ok(Json(json!({ "token": token, "account_id": account.id })))
}

async fn logout(State(app): Shared, headers: axum::http::HeaderMap, Caller(_): Caller) -> StatusCode {
    if let Some(token) = headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
    {
        app.sessions.close(token.trim());
    }
    StatusCode::NO_CONTENT
}

async fn get_account(State(app): Shared, Caller(me): Caller) -> ApiResult<Json<AccountView>> {
    Ok(Json(app.platform.account(me)?.into()))
}

fn present<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<T>, D::Error> {
    T::deserialize(d).map(Some)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AccountPatch {
    #[serde(default)]
    email: Option<String>,
    #[serde(default)]
    traits: Option<TraitPatch>,
    #[serde(default)]
    default_persona: Option<String>,
    /// Absent leaves it alone; `null` clears it.
    #[serde(default, deserialize_with = "present")]
    default_boundary: Option<Option<ConsentBoundary>>,
}

/// Applies the fields in order: email, traits, default persona, default
/// boundary. The boundary is checked against the traits as just updated.
async fn patch_account(
    State(app): Shared,
    Caller(me): Caller,
    Body(req): Body<AccountPatch>,
) -> ApiResult<Json<AccountView>> {
    let p = &app.platform;
    let result = (|| {
        if let Some(email) = &req.email {
            p.change_email(me, email)?;
        }
        if let Some(patch) = &req.traits {
            p.update_traits(me, patch)?;
        }
        if let Some(name) = &req.default_persona {
            p.set_default_persona(me, name)?;
        }
        if let Some(boundary) = req.default_boundary {
            p.set_default_boundary(me, boundary)?;
        }
        p.account(me)
    })();
    app.commit();
    Ok(Json(result?.into()))
}

async fn deactivate_self(State(app): Shared, Caller(me): Caller) -> ApiResult<StatusCode> {
    app.platform.deactivate(me, me)?;
    app.commit();
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonaRequest {
    name: String,
}

async fn claim_persona(
    State(app): Shared,
    Caller(me): Caller,
    Body(req): Body<PersonaRequest>,
) -> ApiResult<impl IntoResponse> {
    let persona = app.platform.claim_persona(me, &req.name)?;
    app.commit();
    Ok((StatusCode::CREATED, Json(json!({ "name": persona.name }))))
}

async fn feed(State(app): Shared, Caller(me): Caller) -> ApiResult<Json<serde_json::Value>> {
    let nodes = app.platform.get_feed(me)?;
    Ok(Json(json!({ "nodes": nodes })))
}

async fn thread(State(app): Shared, Caller(me): Caller, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = thread_id(&id)?;
    let nodes = app.platform.get_thread(me, id)?;
    Ok(Json(json!({ "thread_id": id, "nodes": nodes })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposeRequest {
    #[serde(default)]
    persona: Option<String>,
    body: String,
    #[serde(default)]
    boundary: Option<ConsentBoundary>,
}

/// Posts default to the account's default persona and boundary.
async fn create_post(
    State(app): Shared,
    Caller(me): Caller,
    Body(req): Body<ComposeRequest>,
) -> ApiResult<impl IntoResponse> {
    let account = app.platform.account(me)?;
    let persona = req.persona.unwrap_or_else(|| account.default_persona.to_string());
    let boundary = req.boundary.or(account.default_boundary).unwrap_or_default();
    let node = app.platform.create_post(me, &persona, &req.body, boundary)?;
    app.commit();
    Ok((StatusCode::CREATED, Json(app.platform.view_own(&node))))
}

/// Comments default to the persona already used in the thread and the
/// caller's last-used boundary there.
async fn create_comment(
    State(app): Shared,
    Caller(me): Caller,
    Path(parent): Path<String>,
    Body(req): Body<ComposeRequest>,
) -> ApiResult<impl IntoResponse> {
    let parent = node_id(&parent)?;
    let thread = app.platform.thread_of(me, parent)?;
    let persona = match req.persona {
        Some(p) => p,
        None => app.platform.read(|s| {
            let id = s.identity();
            id.thread_persona(me, thread)
                .cloned()
                .or_else(|| id.account(me).ok().map(|a| a.default_persona.clone()))
                .map(|p| p.to_string())
                .unwrap_or_default()
        }),
    };
    let boundary = match req.boundary {
        Some(b) => b,
        None => app.platform.last_used_boundary(me, thread)?,
    };
    let node = app.platform.create_comment(me, &persona, parent, &req.body, boundary)?;
    app.commit();
    Ok((StatusCode::CREATED, Json(app.platform.view_own(&node))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RestrictRequest {
    boundary: ConsentBoundary,
}

async fn restrict(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
    Body(req): Body<RestrictRequest>,
) -> ApiResult<Json<NodeView>> {
    let node = app.platform.restrict_node_boundary(me, node_id(&id)?, req.boundary)?;
    app.commit();
    Ok(Json(app.platform.view_own(&node)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VisibilityRequest {
    show_boundary: bool,
}

async fn boundary_visibility(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
    Body(req): Body<VisibilityRequest>,
) -> ApiResult<Json<NodeView>> {
    let node = app.platform.toggle_boundary_visibility(me, node_id(&id)?, req.show_boundary)?;
    app.commit();
    Ok(Json(app.platform.view_own(&node)))
}

async fn delete_node(State(app): Shared, Caller(me): Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    app.platform.delete_node(me, node_id(&id)?)?;
    app.commit();
    Ok(StatusCode::NO_CONTENT)
}

async fn last_used_boundary(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let thread = app.platform.thread_of(me, node_id(&id)?)?;
    let boundary = app.platform.last_used_boundary(me, thread)?;
    Ok(Json(json!({ "boundary": boundary })))
}

async fn vocab(State(app): Shared, Caller(_): Caller) -> Json<serde_json::Value> {
    fn entries(map: &std::collections::BTreeMap<String, String>) -> Vec<serde_json::Value> {
        map.iter().map(|(id, label)| json!({ "id": id, "label": label })).collect()
    }
    let v: &Vocabulary = app.platform.vocab();
    Json(json!({
        "programs": entries(&v.programs),
        "faculty": entries(&v.faculty),
        "challenges": entries(&v.challenges),
    }))
}

async fn mod_queue(State(app): Shared, Caller(me): Caller) -> ApiResult<Json<QueueView>> {
    Ok(Json(app.platform.list_queue(me)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SignupReview {
    decision: SignupDecision,
}

async fn mod_signup(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
    Body(req): Body<SignupReview>,
) -> ApiResult<Json<serde_json::Value>> {
    let account = app.platform.approve_signup(me, account_id(&id)?, req.decision)?;
    app.commit();
    Ok(Json(json!({ "account_id": account.id, "status": account.status })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolveRequest {
    recipients: std::collections::BTreeSet<AccountId>,
}

async fn mod_resolve(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
    Body(req): Body<ResolveRequest>,
) -> ApiResult<Json<NodeView>> {
    let node = app.platform.resolve_other_info(me, node_id(&id)?, req.recipients)?;
    app.commit();
    Ok(Json(app.platform.view_own(&node)))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RemoveRequest {
    #[serde(default)]
    reason: String,
}

/// The reason is an optional JSON body.
async fn mod_remove(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let req: RemoveRequest = if body.is_empty() {
        RemoveRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|_| ApiError::invalid("invalid_request"))?
    };
    app.platform.moderate_remove(me, node_id(&id)?, &req.reason)?;
    app.commit();
    Ok(StatusCode::NO_CONTENT)
}

/// Current audience of any node. Moderator diagnostics only.
async fn mod_audience(
    State(app): Shared,
    Caller(me): Caller,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    app.platform.read(|s| s.identity().require_moderator(me).map(|_| ())).map_err(consent_core::PlatformError::from)?;
    let id = node_id(&id)?;
    let audience = app.platform.audience(id).ok_or(ApiError::NOT_FOUND)?;
    Ok(Json(json!({ "node_id": id, "audience": audience })))
}

async fn mod_deactivate(State(app): Shared, Caller(me): Caller, Path(id): Path<String>) -> ApiResult<StatusCode> {
    app.platform.deactivate(me, account_id(&id)?)?;
    app.commit();
    Ok(StatusCode::NO_CONTENT)
}

async fn fallback() -> ApiError {
    ApiError::NOT_FOUND
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/register", post(register))
        .route("/session", post(login).delete(logout))
        .route("/account", get(get_account).patch(patch_account).delete(deactivate_self))
        .route("/personas", post(claim_persona))
        .route("/feed", get(feed))
        .route("/threads/{id}", get(thread))
        .route("/posts", post(create_post))
        .route("/posts/{id}/comments", post(create_comment))
        .route("/nodes/{id}", axum::routing::delete(delete_node))
        .route("/nodes/{id}/boundary", patch(restrict))
        .route("/nodes/{id}/boundary-visibility", patch(boundary_visibility))
        .route("/nodes/{id}/last-used-boundary", get(last_used_boundary))
        .route("/vocab", get(vocab))
        .route("/mod/queue", get(mod_queue))
        .route("/mod/signups/{id}", post(mod_signup))
        .route("/mod/nodes/{id}/resolve", post(mod_resolve))
        .route("/mod/nodes/{id}", axum::routing::delete(mod_remove))
        .route("/mod/nodes/{id}/audience", get(mod_audience))
        .route("/mod/accounts/{id}/deactivate", post(mod_deactivate))
        .fallback(fallback)
        .with_state(state)
}
