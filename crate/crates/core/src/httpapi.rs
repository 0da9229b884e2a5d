//! REST resources over the engine and store, independent of any HTTP server.
//!
//! A server adapter turns each request into an [`ApiRequest`] and writes the
//! returned [`ApiResponse`] back. Bodies are JSON both ways; errors use
//! `{"error": code, "message": text, "fields": {name: message}}`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde_json::{json, Map, Value as Json};

use crate::access::{self, CrudOp};
use crate::engine::{Engine, EngineError, NextStep, RenderedElement, Submission};
use crate::store::{FieldErrors, StoreError};
use crate::syntax::ast::{ClassDef, ClassPageMode, ElementKind, EntryRef, Multiplicity};
use crate::value::{from_json, DomainObject, ObjectId, PrimValue};

/// Every endpoint as `(method, path pattern)`.
pub const ROUTES: &[(&str, &str)] = &[
    ("POST", "/login"),
    ("GET", "/menu"),
    ("GET", "/tasks"),
    ("GET", "/activities"),
    ("POST", "/activity/{name}"),
    ("GET", "/action/{id}"),
    ("POST", "/action/{id}"),
    ("GET", "/page/{name}"),
    ("GET", "/class/{C}"),
    ("POST", "/class/{C}"),
    ("GET", "/class/{C}/new"),
    ("GET", "/class/{C}/{id}"),
    ("PUT", "/class/{C}/{id}"),
    ("DELETE", "/class/{C}/{id}"),
];

pub fn route_table() -> &'static [(&'static str, &'static str)] {
    ROUTES
}

pub const SESSION_TTL_HOURS: i64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: String,
    /// Path, optionally with a query string (ignored).
    pub path: String,
    /// The token from an `Authorization: Bearer` header.
    pub bearer: Option<String>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    pub fn new(method: &str, path: &str) -> Self {
        ApiRequest {
            method: method.to_string(),
            path: path.to_string(),
            bearer: None,
            body: Vec::new(),
        }
    }

    pub fn bearer(mut self, token: impl Into<String>) -> Self {
        self.bearer = Some(token.into());
        self
    }

    pub fn json(mut self, body: &Json) -> Self {
        self.body = body.to_string().into_bytes();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub location: Option<String>,
    pub body: Json,
}

impl ApiResponse {
    fn ok(body: Json) -> Self {
        ApiResponse {
            status: 200,
            location: None,
            body,
        }
    }

    fn with_status(status: u16, body: Json) -> Self {
        ApiResponse {
            status,
            location: None,
            body,
        }
    }

    fn error(status: u16, code: &str, message: impl Into<String>, fields: FieldErrors) -> Self {
        ApiResponse::with_status(
            status,
            json!({"error": code, "message": message.into(), "fields": fields}),
        )
    }

    fn redirect(location: String, body: Json) -> Self {
        ApiResponse {
            status: 303,
            location: Some(location),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub token: String,
    pub user_id: ObjectId,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

type Handled = Result<ApiResponse, ApiResponse>;

fn not_found(what: impl Into<String>) -> ApiResponse {
    ApiResponse::error(404, "not-found", what, FieldErrors::new())
}

fn unauthorized() -> ApiResponse {
    ApiResponse::error(401, "unauthorized", "log in first", FieldErrors::new())
}

fn forbidden(message: impl Into<String>) -> ApiResponse {
    ApiResponse::error(403, "forbidden", message, FieldErrors::new())
}

fn bad_request(message: impl Into<String>) -> ApiResponse {
    ApiResponse::error(400, "bad-request", message, FieldErrors::new())
}

fn engine_error(e: EngineError) -> ApiResponse {
    let message = e.to_string();
    let none = FieldErrors::new;
    match e {
        EngineError::UnknownActivity(_) | EngineError::InstanceNotFound(_) => not_found(message),
        EngineError::PermissionDenied(_) => forbidden(message),
        EngineError::WrongUser { .. } => ApiResponse::error(403, "wrong-user", message, none()),
        EngineError::InstanceGone(_) => ApiResponse::error(410, "gone", message, none()),
        EngineError::Validation(fields) => ApiResponse::error(422, "validation", message, fields),
        EngineError::MissingDecision(_) => {
            ApiResponse::error(422, "validation", message.clone(), FieldErrors::from([("_decision".into(), message)]))
        }
        EngineError::EmptyCollection(_)
        | EngineError::Unbound(_)
        | EngineError::NotAnObject(_)
        | EngineError::UnsavedLink(_)
        | EngineError::DeadEnd(_)
        | EngineError::AutomaticCycle => ApiResponse::error(422, "action-failed", message, none()),
        EngineError::Conflict(_) => ApiResponse::error(409, "conflict", message, none()),
        EngineError::Store(e) => store_error(e),
        EngineError::NoView(_) | EngineError::ScriptExhausted(_) => {
            ApiResponse::error(500, "internal", message, none())
        }
    }
}

fn store_error(e: StoreError) -> ApiResponse {
    let message = e.to_string();
    match e {
        StoreError::UnknownClass(_) | StoreError::NotFound { .. } | StoreError::ContextNotFound(_) => {
            not_found(message)
        }
        StoreError::Schema(fields) => ApiResponse::error(422, "validation", message, fields),
        StoreError::AuthenticationFailed => ApiResponse::error(401, "unauthorized", message, FieldErrors::new()),
        StoreError::Conflict(_) => ApiResponse::error(409, "conflict", message, FieldErrors::new()),
        StoreError::Io(_) | StoreError::Corrupt { .. } => {
            ApiResponse::error(500, "internal", "storage failure", FieldErrors::new())
        }
    }
}

pub struct Api {
    engine: Engine,
    sessions: Mutex<HashMap<String, Session>>,
    ttl: Duration,
}

impl Api {
    pub fn new(engine: Engine) -> Self {
        Api {
            engine,
            sessions: Mutex::new(HashMap::new()),
            ttl: Duration::hours(SESSION_TTL_HOURS),
        }
    }

    pub fn with_session_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        match self.dispatch(req) {
            Ok(r) | Err(r) => r,
        }
    }

    fn dispatch(&self, req: &ApiRequest) -> Handled {
        let path = req.path.split('?').next().unwrap_or_default();
        let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
        let method = req.method.to_ascii_uppercase();
        let allowed: &[&str] = match segments.as_slice() {
            ["login"] => &["POST"],
            ["menu"] | ["tasks"] | ["activities"] | ["page", _] => &["GET"],
            ["activity", _] => &["POST"],
            ["action", _] | ["class", _] => &["GET", "POST"],
            ["class", _, "new"] => &["GET"],
            ["class", _, _] => &["GET", "PUT", "DELETE"],
            _ => return Err(not_found(format!("no resource at `{path}`"))),
        };
        if !allowed.contains(&method.as_str()) {
            return Err(ApiResponse::error(
                405,
                "method-not-allowed",
                format!("{method} is not supported on `{path}`; use {}", allowed.join(" or ")),
                FieldErrors::new(),
            ));
        }
        let session = self.session(req)?;
        let user = session.as_ref().map(|s| s.user_id.as_str());
        match (method.as_str(), segments.as_slice()) {
            ("POST", ["login"]) => self.login(req),
            ("GET", ["menu"]) => Ok(self.menu(user)),
            ("GET", ["tasks"]) => Ok(ApiResponse::ok(json!(self.engine.list_tasks(require(user)?)))),
            ("GET", ["activities"]) => Ok(self.activities(user)),
            ("POST", ["activity", name]) => self.start(name, require(user)?),
            ("GET", ["action", id]) => self.get_action(id, require(user)?),
            ("POST", ["action", id]) => self.post_action(id, require(user)?, req),
            ("GET", ["page", name]) => self.static_page(name, user),
            ("GET", ["class", c]) => self.class_list(c, user),
            ("POST", ["class", c]) => self.class_create(c, user, req),
            ("GET", ["class", c, "new"]) => self.class_form(c, user),
            ("GET", ["class", c, id]) => self.class_detail(c, id, user),
            ("PUT", ["class", c, id]) => self.class_update(c, id, user, req),
            ("DELETE", ["class", c, id]) => self.class_delete(c, id, user),
            _ => Err(not_found(format!("no resource at `{path}`"))),
        }
    }

    /// `None` without a token; 401 for an unknown or expired token.
    fn session(&self, req: &ApiRequest) -> Result<Option<Session>, ApiResponse> {
        let Some(token) = &req.bearer else { return Ok(None) };
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        match sessions.get(token) {
            Some(s) if s.expires_at > Utc::now() => Ok(Some(s.clone())),
            Some(_) => {
                sessions.remove(token);
                Err(ApiResponse::error(401, "unauthorized", "the session has expired", FieldErrors::new()))
            }
            None => Err(unauthorized()),
        }
    }

    fn login(&self, req: &ApiRequest) -> Handled {
        let body = parse_body(req)?;
        let field = |name: &str| body.get(name).and_then(Json::as_str).map(str::to_string);
        let (Some(login), Some(password)) = (field("login"), field("password")) else {
            return Err(bad_request("expected {\"login\": ..., \"password\": ...}"));
        };
        let user = self
            .engine
            .store()
            .authenticate(&login, &password)
            .map_err(store_error)?;
        let token = hex_token();
        let now = Utc::now();
        let session = Session {
            token: token.clone(),
            user_id: user.clone(),
            created_at: now,
            expires_at: now + self.ttl,
        };
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(token.clone(), session.clone());
        Ok(ApiResponse::ok(json!({
            "token": token,
            "user": user,
            "roles": self.engine.roles(Some(&user)),
            "expiresAt": session.expires_at.to_rfc3339(),
        })))
    }

    fn menu(&self, user: Option<&str>) -> ApiResponse {
        let app = &self.engine.system().app;
        let roles = self.engine.roles(user);
        let entries: Vec<Json> = access::menu_for(app, &roles)
            .into_iter()
            .map(|m| match &m.target {
                EntryRef::Page(p) => json!({"kind": "page", "name": p, "method": "GET", "href": format!("/page/{p}")}),
                EntryRef::Activity(a) => {
                    json!({"kind": "activity", "name": a, "method": "POST", "href": format!("/activity/{a}")})
                }
                EntryRef::Class { class, mode: ClassPageMode::List } => {
                    json!({"kind": "list", "name": class, "method": "GET", "href": format!("/class/{class}")})
                }
                EntryRef::Class { class, mode: ClassPageMode::Create } => {
                    json!({"kind": "create", "name": class, "method": "GET", "href": format!("/class/{class}/new")})
                }
            })
            .collect();
        ApiResponse::ok(json!({"app": app.name, "roles": roles, "entries": entries}))
    }

    fn activities(&self, user: Option<&str>) -> ApiResponse {
        let app = &self.engine.system().app;
        let roles = self.engine.roles(user);
        let list: Vec<Json> = self
            .engine
            .system()
            .activities
            .keys()
            .map(|name| {
                json!({
                    "name": name,
                    "href": format!("/activity/{name}"),
                    "permitted": access::permits(app, &roles, &EntryRef::Activity(name.clone())),
                })
            })
            .collect();
        ApiResponse::ok(json!(list))
    }

    fn start(&self, name: &str, user: &str) -> Handled {
        let (_, next) = self.engine.start_activity(name, user).map_err(engine_error)?;
        Ok(next_step(next))
    }

    fn get_action(&self, id: &str, user: &str) -> Handled {
        let render = self.engine.render_by_action_id(id, user).map_err(engine_error)?;
        Ok(ApiResponse::ok(json!(render)))
    }

    fn post_action(&self, id: &str, user: &str, req: &ApiRequest) -> Handled {
        let body = parse_body(req)?;
        let mut submission = Submission::default();
        for (key, value) in body {
            let text = match value {
                Json::Null => continue,
                Json::String(s) => s,
                Json::Number(n) => n.to_string(),
                Json::Bool(b) => b.to_string(),
                other => return Err(bad_request(format!("field `{key}` must be a string, found {other}"))),
            };
            match key.as_str() {
                "_decision" => submission.decision = Some(text),
                "_selection" => submission.selection = Some(text),
                _ => {
                    submission.form.insert(key, text);
                }
            }
        }
        let next = self.engine.submit_by_action_id(id, user, &submission).map_err(engine_error)?;
        Ok(next_step(next))
    }

    fn static_page(&self, name: &str, user: Option<&str>) -> Handled {
        let page = self
            .engine
            .system()
            .page(name)
            .ok_or_else(|| not_found(format!("no page `{name}`")))?;
        let roles = self.engine.roles(user);
        if !access::permits(&self.engine.system().app, &roles, &EntryRef::Page(name.to_string())) {
            return Err(forbidden(format!("not permitted to view page `{name}`")));
        }
        if !page.params.is_empty() {
            return Err(not_found(format!("page `{name}` takes parameters and is shown only within an activity")));
        }
        let elements: Vec<RenderedElement> = page
            .elements
            .iter()
            .filter_map(|e| match &e.kind {
                ElementKind::Heading { level, text } => Some(RenderedElement::Heading {
                    level: *level,
                    text: text.clone(),
                }),
                ElementKind::Text(text) => Some(RenderedElement::Text { text: text.clone() }),
                _ => None,
            })
            .collect();
        Ok(ApiResponse::ok(json!({
            "page": name,
            "elements": elements,
            "decisions": [],
            "fields": {},
        })))
    }

    // -- default CRUD -------------------------------------------------------------

    fn crud_class(&self, class: &str, user: Option<&str>, op: CrudOp) -> Result<&ClassDef, ApiResponse> {
        let def = self
            .engine
            .system()
            .class(class)
            .ok_or_else(|| not_found(format!("no class `{class}`")))?;
        let roles = self.engine.roles(user);
        if !access::permits_crud(&self.engine.system().app, &roles, class, op) {
            return Err(if user.is_none() {
                unauthorized()
            } else {
                forbidden(format!("not permitted to {} `{class}` objects", if op == CrudOp::Read { "read" } else { "change" }))
            });
        }
        Ok(def)
    }

    fn class_list(&self, class: &str, user: Option<&str>) -> Handled {
        let def = self.crud_class(class, user, CrudOp::Read)?;
        let objects = self.engine.store().load_all(class).map_err(store_error)?;
        let columns: Vec<&str> = def.attributes.iter().map(|a| a.name.as_str()).collect();
        let rows: Vec<Json> = objects
            .iter()
            .map(|o| {
                let values: Vec<Json> = def
                    .attributes
                    .iter()
                    .map(|a| {
                        if is_secret(def, &a.name) {
                            Json::Null
                        } else {
                            o.fields.get(&a.name).map_or(Json::Null, PrimValue::to_json)
                        }
                    })
                    .collect();
                json!({"id": o.id, "href": format!("/class/{class}/{}", o.id), "values": values})
            })
            .collect();
        Ok(ApiResponse::ok(json!({
            "class": class,
            "mode": "list",
            "elements": [
                {"kind": "heading", "level": 1, "text": class},
                {"kind": "table", "param": class, "selectable": false, "columns": columns, "rows": rows},
            ],
        })))
    }

    fn class_form(&self, class: &str, user: Option<&str>) -> Handled {
        let def = self.crud_class(class, user, CrudOp::Write)?;
        let mut elements = vec![json!({"kind": "heading", "level": 1, "text": format!("New {class}")})];
        let mut fields = Map::new();
        for a in &def.attributes {
            elements.push(json!({
                "kind": "input",
                "param": class,
                "attr": a.name,
                "field": a.name,
                "type": a.ty.name(),
                "value": null,
                "editable": true,
            }));
            fields.insert(a.name.clone(), json!(a.ty.name()));
        }
        let links: Map<String, Json> = def
            .associations
            .iter()
            .map(|r| {
                let many = r.multiplicity == Multiplicity::Many;
                (r.role.clone(), json!({"target": r.target, "many": many}))
            })
            .collect();
        Ok(ApiResponse::ok(json!({
            "class": class,
            "mode": "create",
            "elements": elements,
            "fields": fields,
            "links": links,
            "action": {"method": "POST", "href": format!("/class/{class}")},
        })))
    }

    fn class_create(&self, class: &str, user: Option<&str>, req: &ApiRequest) -> Handled {
        let def = self.crud_class(class, user, CrudOp::Write)?;
        let (fields, links) = object_input(def, parse_body(req)?)?;
        let obj = self
            .engine
            .store()
            .create_object(class, fields, links)
            .map_err(store_error)?;
        Ok(ApiResponse {
            status: 201,
            location: Some(format!("/class/{class}/{}", obj.id)),
            body: object_json(def, &obj),
        })
    }

    fn class_detail(&self, class: &str, id: &str, user: Option<&str>) -> Handled {
        let def = self.crud_class(class, user, CrudOp::Read)?;
        let obj = self.engine.store().load(class, id).map_err(store_error)?;
        Ok(ApiResponse::ok(object_json(def, &obj)))
    }

    fn class_update(&self, class: &str, id: &str, user: Option<&str>, req: &ApiRequest) -> Handled {
        let def = self.crud_class(class, user, CrudOp::Write)?;
        let (fields, links) = object_input(def, parse_body(req)?)?;
        let obj = self
            .engine
            .store()
            .update(class, id, fields, links)
            .map_err(store_error)?;
        Ok(ApiResponse::ok(object_json(def, &obj)))
    }

    fn class_delete(&self, class: &str, id: &str, user: Option<&str>) -> Handled {
        self.crud_class(class, user, CrudOp::Write)?;
        self.engine.store().delete(class, id).map_err(store_error)?;
        Ok(ApiResponse::ok(json!({"status": "deleted", "id": id})))
    }
}

fn require(user: Option<&str>) -> Result<&str, ApiResponse> {
    user.ok_or_else(unauthorized)
}

fn next_step(next: NextStep) -> ApiResponse {
    match &next {
        NextStep::Interactive { action_id, .. } => ApiResponse::redirect(format!("/action/{action_id}"), json!(next)),
        NextStep::Finished { .. } => ApiResponse::ok(json!(next)),
    }
}

fn hex_token() -> String {
    let bytes: [u8; 24] = rand::thread_rng().gen();
    hex::encode(bytes)
}

/// An empty body reads as `{}`.
fn parse_body(req: &ApiRequest) -> Result<Map<String, Json>, ApiResponse> {
    if req.body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Map::new());
    }
    match serde_json::from_slice::<Json>(&req.body) {
        Ok(Json::Object(map)) => Ok(map),
        Ok(_) => Err(bad_request("the body must be a JSON object")),
        Err(e) => Err(bad_request(format!("malformed JSON body: {e}"))),
    }
}

fn is_secret(def: &ClassDef, attr: &str) -> bool {
    def.is_user && attr == "password"
}

type ObjectInput = (BTreeMap<String, PrimValue>, BTreeMap<String, Vec<ObjectId>>);

/// Splits a flat JSON object into typed fields and links. Association values
/// are an id or a list of ids.
fn object_input(def: &ClassDef, body: Map<String, Json>) -> Result<ObjectInput, ApiResponse> {
    let mut errors = FieldErrors::new();
    let mut fields = BTreeMap::new();
    let mut links = BTreeMap::new();
    for (key, value) in body {
        if let Some(attr) = def.attribute(&key) {
            if value.is_null() {
                continue;
            }
            match from_json(attr.ty, &value) {
                Ok(v) => {
                    fields.insert(key, v);
                }
                Err(m) => {
                    errors.insert(key, m);
                }
            }
        } else if def.association(&key).is_some() {
            let ids = match value {
                Json::Null => Some(Vec::new()),
                Json::String(s) => Some(vec![s]),
                Json::Array(items) => items
                    .into_iter()
                    .map(|v| v.as_str().map(str::to_string))
                    .collect::<Option<Vec<_>>>(),
                _ => None,
            };
            match ids {
                Some(ids) => {
                    links.insert(key, ids);
                }
                None => {
                    errors.insert(key, "expected an object id or a list of ids".into());
                }
            }
        } else {
            errors.insert(key, format!("`{}` has no attribute or association of this name", def.name));
        }
    }
    if errors.is_empty() {
        Ok((fields, links))
    } else {
        Err(ApiResponse::error(422, "validation", "invalid object data", errors))
    }
}

fn object_json(def: &ClassDef, obj: &DomainObject) -> Json {
    let mut doc = json!(obj);
    if def.is_user {
        if let Some(fields) = doc.get_mut("fields").and_then(Json::as_object_mut) {
            fields.remove("password");
        }
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_route_pattern_is_dispatched() {
        for (method, pattern) in ROUTES {
            assert!(["GET", "POST", "PUT", "DELETE"].contains(method), "{pattern}");
            assert!(pattern.starts_with('/'));
        }
        assert_eq!(ROUTES.len(), 14);
    }

    #[test]
    fn empty_body_is_an_empty_object() {
        let req = ApiRequest::new("POST", "/x");
        assert!(parse_body(&req).unwrap().is_empty());
        let bad = ApiRequest {
            body: b"[1]".to_vec(),
            ..ApiRequest::new("POST", "/x")
        };
        assert_eq!(parse_body(&bad).unwrap_err().status, 400);
    }
}
