//! Persistence for domain objects, users, execution contexts, and inboxes.
//!
//! On disk (when opened on a directory):
//!
//! ```text
//! data/objects/<Class>/<id>.json    one document per object
//! data/objects/<Class>/.order       ids in creation order
//! data/contexts/<instanceId>.json   one document per live instance
//! data/inbox/<userId>.json          notifications per user
//! data/finished.json                ids of completed instances
//! ```
//!
//! All writes go through one lock, so readers observe a sequentially
//! consistent state. Every document is rewritten atomically (temp file and
//! rename) when it changes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::syntax::ast::{ClassDef, ClassModel, Multiplicity};
use crate::value::{conform, DomainObject, ObjectId, PrimValue, Value};

/// Field name → message.
pub type FieldErrors = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("{class} `{id}` not found")]
    NotFound { class: String, id: ObjectId },
    #[error("execution context `{0}` not found")]
    ContextNotFound(String),
    #[error("schema violation: {}", format_fields(.0))]
    Schema(FieldErrors),
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("instance `{0}` is being modified by another request")]
    Conflict(String),
    #[error("storage I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt document {path}: {source}")]
    Corrupt {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn format_fields(fields: &FieldErrors) -> String {
    fields
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Phase {
    BeforeView,
    AwaitingSubmit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TokenPosition {
    AtAction { action: String, phase: Phase },
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub user: ObjectId,
    pub message: String,
}

/// Runtime state of one activity instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionContext {
    pub instance_id: String,
    pub activity_name: String,
    pub token: TokenPosition,
    /// Keyed by `Action.name` for pins and variables.
    pub bindings: BTreeMap<String, Value>,
    pub role_bindings: BTreeMap<String, ObjectId>,
    pub transient_objects: BTreeMap<String, DomainObject>,
    pub started_by: ObjectId,
    pub notifications: Vec<Notification>,
    /// Incremented every time the token enters an interactive action.
    pub epoch: u64,
    pub created_seq: u64,
    pub next_temp: u64,
}

/// Writes the engine buffers while executing one request, applied as a unit.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Batch {
    pub creates: Vec<DomainObject>,
    /// `(id, fields, links)` merged into existing objects.
    pub updates: Vec<(ObjectId, BTreeMap<String, PrimValue>, BTreeMap<String, Vec<ObjectId>>)>,
    pub notifications: Vec<Notification>,
    pub context: Option<ContextWrite>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContextWrite {
    Save(Box<ExecutionContext>),
    Finish(String),
}

#[derive(Default)]
struct State {
    objects: HashMap<ObjectId, DomainObject>,
    order: BTreeMap<String, Vec<ObjectId>>,
    contexts: BTreeMap<String, ExecutionContext>,
    finished: BTreeSet<String>,
    inbox: BTreeMap<ObjectId, Vec<String>>,
    reserved: HashSet<String>,
    next_seq: u64,
}

impl State {
    fn id_taken(&self, id: &str) -> bool {
        self.objects.contains_key(id)
            || self.contexts.contains_key(id)
            || self.finished.contains(id)
            || self.reserved.contains(id)
    }
}

pub struct Store {
    dir: Option<PathBuf>,
    schema: ClassModel,
    state: Mutex<State>,
    busy: Mutex<HashSet<String>>,
}

/// Held while one request works on an instance; dropping it releases the instance.
pub struct InstanceGuard<'a> {
    store: &'a Store,
    instance: String,
}

impl Drop for InstanceGuard<'_> {
    fn drop(&mut self) {
        self.store.busy.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.instance);
    }
}

const ID_ALPHABET: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
const ID_LEN: usize = 5;

pub fn random_id() -> String {
    let mut rng = rand::thread_rng();
    (0..ID_LEN)
        .map(|_| ID_ALPHABET[rng.gen_range(0..ID_ALPHABET.len())] as char)
        .collect()
}

const HASH_PREFIX: &str = "sha256$";

fn hash_password(password: &str) -> String {
    let salt: [u8; 16] = rand::thread_rng().gen();
    let salt = hex::encode(salt);
    format!("{HASH_PREFIX}{salt}${}", digest(&salt, password))
}

fn digest(salt: &str, password: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(password.as_bytes());
    hex::encode(h.finalize())
}

fn verify_password(stored: &str, password: &str) -> bool {
    let Some(rest) = stored.strip_prefix(HASH_PREFIX) else { return false };
    let Some((salt, hash)) = rest.split_once('$') else { return false };
    digest(salt, password) == hash
}

impl Store {
    pub fn in_memory(schema: ClassModel) -> Self {
        Store {
            dir: None,
            schema,
            state: Mutex::new(State {
                next_seq: 1,
                ..State::default()
            }),
            busy: Mutex::new(HashSet::new()),
        }
    }

    /// Opens (creating if needed) a store rooted at `dir`.
    pub fn open(dir: impl AsRef<Path>, schema: ClassModel) -> StoreResult<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("objects"))?;
        fs::create_dir_all(dir.join("contexts"))?;
        fs::create_dir_all(dir.join("inbox"))?;
        let mut state = State::default();

        for class in &schema.classes {
            let class_dir = dir.join("objects").join(&class.name);
            if !class_dir.is_dir() {
                continue;
            }
            let mut ids: Vec<ObjectId> = match fs::read_to_string(class_dir.join(".order")) {
                Ok(text) => text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect(),
                Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            let listed: HashSet<ObjectId> = ids.iter().cloned().collect();
            let mut unlisted = Vec::new();
            for entry in fs::read_dir(&class_dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let obj: DomainObject = read_json(&path)?;
                if !listed.contains(&obj.id) {
                    unlisted.push(obj.id.clone());
                }
                state.objects.insert(obj.id.clone(), obj);
            }
            unlisted.sort();
            ids.extend(unlisted);
            ids.retain(|id| state.objects.contains_key(id));
            state.order.insert(class.name.clone(), ids);
        }

        for entry in fs::read_dir(dir.join("contexts"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                let ctx: ExecutionContext = read_json(&path)?;
                state.contexts.insert(ctx.instance_id.clone(), ctx);
            }
        }
        for entry in fs::read_dir(dir.join("inbox"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                let user = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let messages: Vec<String> = read_json(&path)?;
                state.inbox.insert(user, messages);
            }
        }
        let finished_path = dir.join("finished.json");
        if finished_path.exists() {
            state.finished = read_json(&finished_path)?;
        }
        state.next_seq = state.contexts.values().map(|c| c.created_seq).max().unwrap_or(0) + 1;

        Ok(Store {
            dir: Some(dir),
            schema,
            state: Mutex::new(state),
            busy: Mutex::new(HashSet::new()),
        })
    }

    pub fn schema(&self) -> &ClassModel {
        &self.schema
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn class(&self, name: &str) -> StoreResult<&ClassDef> {
        self.schema
            .class(name)
            .ok_or_else(|| StoreError::UnknownClass(name.to_string()))
    }

    /// A fresh id, unique among objects and instances, held until used.
    pub fn reserve_id(&self) -> ObjectId {
        let mut st = self.state();
        loop {
            let id = random_id();
            if !st.id_taken(&id) {
                st.reserved.insert(id.clone());
                return id;
            }
        }
    }

    pub fn next_seq(&self) -> u64 {
        let mut st = self.state();
        let seq = st.next_seq;
        st.next_seq += 1;
        seq
    }

    pub fn is_user_class(&self, class: &str) -> bool {
        self.schema.class(class).is_some_and(|c| c.is_user)
    }

    // -- domain objects ------------------------------------------------------

    pub fn create_object(
        &self,
        class: &str,
        fields: BTreeMap<String, PrimValue>,
        links: BTreeMap<String, Vec<ObjectId>>,
    ) -> StoreResult<DomainObject> {
        let id = self.reserve_id();
        let obj = DomainObject {
            class_name: class.to_string(),
            id,
            fields,
            links,
        };
        let created = self.commit(Batch {
            creates: vec![obj],
            ..Batch::default()
        });
        match created {
            Ok(mut objs) => Ok(objs.remove(0)),
            Err(e) => Err(e),
        }
    }

    pub fn load(&self, class: &str, id: &str) -> StoreResult<DomainObject> {
        self.class(class)?;
        let st = self.state();
        match st.objects.get(id) {
            Some(obj) if obj.class_name == class => Ok(obj.clone()),
            _ => Err(StoreError::NotFound {
                class: class.to_string(),
                id: id.to_string(),
            }),
        }
    }

    /// Looks an object up by id regardless of class.
    pub fn find(&self, id: &str) -> Option<DomainObject> {
        self.state().objects.get(id).cloned()
    }

    /// All objects of `class` in creation order.
    pub fn load_all(&self, class: &str) -> StoreResult<Vec<DomainObject>> {
        self.class(class)?;
        let st = self.state();
        Ok(st
            .order
            .get(class)
            .map(|ids| ids.iter().filter_map(|id| st.objects.get(id).cloned()).collect())
            .unwrap_or_default())
    }

    pub fn update(
        &self,
        class: &str,
        id: &str,
        fields: BTreeMap<String, PrimValue>,
        links: BTreeMap<String, Vec<ObjectId>>,
    ) -> StoreResult<DomainObject> {
        self.load(class, id)?;
        self.commit(Batch {
            updates: vec![(id.to_string(), fields, links)],
            ..Batch::default()
        })?;
        self.load(class, id)
    }

    /// Deletes the object and removes every link pointing at it.
    pub fn delete(&self, class: &str, id: &str) -> StoreResult<()> {
        self.load(class, id)?;
        let mut st = self.state();
        st.objects.remove(id);
        if let Some(ids) = st.order.get_mut(class) {
            ids.retain(|x| x != id);
        }
        let mut touched = Vec::new();
        for obj in st.objects.values_mut() {
            let mut changed = false;
            for targets in obj.links.values_mut() {
                let before = targets.len();
                targets.retain(|t| t != id);
                changed |= targets.len() != before;
            }
            if changed {
                touched.push(obj.clone());
            }
        }
        if let Some(dir) = &self.dir {
            let class_dir = dir.join("objects").join(class);
            remove_if_exists(&class_dir.join(format!("{id}.json")))?;
            write_order(&class_dir, st.order.get(class).map(Vec::as_slice).unwrap_or_default())?;
            for obj in &touched {
                write_json(&object_path(dir, obj), obj)?;
            }
        }
        Ok(())
    }

    /// Succeeds iff exactly one «user» object has this login and password.
    pub fn authenticate(&self, login: &str, password: &str) -> StoreResult<ObjectId> {
        let st = self.state();
        let mut matches = st.objects.values().filter(|o| {
            self.is_user_class(&o.class_name)
                && o.fields.get("login") == Some(&PrimValue::Str(login.to_string()))
                && matches!(o.fields.get("password"), Some(PrimValue::Str(h)) if verify_password(h, password))
        });
        match (matches.next(), matches.next()) {
            (Some(user), None) => Ok(user.id.clone()),
            _ => Err(StoreError::AuthenticationFailed),
        }
    }

    /// Validates a batch against the schema and the current state, then
    /// applies it. Nothing is written unless every part is valid.
    /// Returns the created objects as stored.
    pub fn commit(&self, batch: Batch) -> StoreResult<Vec<DomainObject>> {
        let mut st = self.state();
        let mut pending_class: HashMap<ObjectId, String> = HashMap::new();
        for obj in &batch.creates {
            if st.objects.contains_key(&obj.id) || pending_class.contains_key(&obj.id) {
                return Err(StoreError::Schema(FieldErrors::from([(
                    "id".to_string(),
                    format!("`{}` is already in use", obj.id),
                )])));
            }
            pending_class.insert(obj.id.clone(), obj.class_name.clone());
        }

        let mut creates = Vec::with_capacity(batch.creates.len());
        for obj in batch.creates {
            let mut obj = obj;
            obj.fields = self.validate(&st, &pending_class, &obj.class_name, None, obj.fields, &obj.links, true)?;
            creates.push(obj);
        }
        let mut updates = Vec::with_capacity(batch.updates.len());
        for (id, fields, links) in batch.updates {
            let current = match st.objects.get(&id) {
                Some(o) => o.clone(),
                None => {
                    return Err(StoreError::NotFound {
                        class: "object".into(),
                        id,
                    })
                }
            };
            let fields = self.validate(&st, &pending_class, &current.class_name, Some(&id), fields, &links, false)?;
            let mut merged = current;
            merged.fields.extend(fields);
            merged.links.extend(links);
            // required-field and login checks on the merged result
            self.check_user_object(&st, &creates, &merged)?;
            updates.push(merged);
        }
        for obj in &creates {
            self.check_user_object(&st, &creates, obj)?;
        }

        // apply
        let dir = self.dir.clone();
        for obj in &creates {
            st.reserved.remove(&obj.id);
            st.objects.insert(obj.id.clone(), obj.clone());
            st.order.entry(obj.class_name.clone()).or_default().push(obj.id.clone());
        }
        for obj in &updates {
            st.objects.insert(obj.id.clone(), obj.clone());
        }
        let mut inbox_touched = BTreeSet::new();
        for n in &batch.notifications {
            st.inbox.entry(n.user.clone()).or_default().push(n.message.clone());
            inbox_touched.insert(n.user.clone());
        }
        let mut finished_changed = false;
        match &batch.context {
            Some(ContextWrite::Save(ctx)) => {
                st.reserved.remove(&ctx.instance_id);
                st.contexts.insert(ctx.instance_id.clone(), (**ctx).clone());
            }
            Some(ContextWrite::Finish(id)) => {
                st.reserved.remove(id);
                st.contexts.remove(id);
                st.finished.insert(id.clone());
                finished_changed = true;
            }
            None => {}
        }

        if let Some(dir) = dir {
            let mut order_touched = BTreeSet::new();
            for obj in creates.iter().chain(&updates) {
                write_json(&object_path(&dir, obj), obj)?;
            }
            for obj in &creates {
                order_touched.insert(obj.class_name.clone());
            }
            for class in order_touched {
                let class_dir = dir.join("objects").join(&class);
                write_order(&class_dir, st.order.get(&class).map(Vec::as_slice).unwrap_or_default())?;
            }
            for user in inbox_touched {
                write_json(&dir.join("inbox").join(format!("{user}.json")), &st.inbox[&user])?;
            }
            match &batch.context {
                Some(ContextWrite::Save(ctx)) => {
                    write_json(&context_path(&dir, &ctx.instance_id), ctx)?;
                }
                Some(ContextWrite::Finish(id)) => {
                    remove_if_exists(&context_path(&dir, id))?;
                }
                None => {}
            }
            if finished_changed {
                write_json(&dir.join("finished.json"), &st.finished)?;
            }
        }
        Ok(creates)
    }

    /// Type-checks fields and links of one object. Returns normalized fields.
    #[allow(clippy::too_many_arguments)]
    fn validate(
        &self,
        st: &State,
        pending: &HashMap<ObjectId, String>,
        class: &str,
        own_id: Option<&str>,
        fields: BTreeMap<String, PrimValue>,
        links: &BTreeMap<String, Vec<ObjectId>>,
        creating: bool,
    ) -> StoreResult<BTreeMap<String, PrimValue>> {
        let def = self.class(class)?;
        let mut errors = FieldErrors::new();
        let mut out = BTreeMap::new();
        for (name, value) in fields {
            match def.attribute(&name) {
                None => {
                    errors.insert(name, format!("`{class}` has no attribute of this name"));
                }
                Some(attr) => match conform(attr.ty, value) {
                    Ok(v) => {
                        let v = match (&v, def.is_user && name == "password") {
                            (PrimValue::Str(plain), true) => PrimValue::Str(hash_password(plain)),
                            _ => v,
                        };
                        out.insert(name, v);
                    }
                    Err(msg) => {
                        errors.insert(name, msg);
                    }
                },
            }
        }
        for (role, targets) in links {
            let Some(assoc) = def.association(role) else {
                errors.insert(role.clone(), format!("`{class}` has no association of this name"));
                continue;
            };
            if assoc.multiplicity == Multiplicity::One && targets.len() > 1 {
                errors.insert(role.clone(), "at most one object may be linked".into());
                continue;
            }
            for t in targets {
                let target_class = st
                    .objects
                    .get(t)
                    .map(|o| o.class_name.as_str())
                    .or_else(|| pending.get(t).map(String::as_str));
                match target_class {
                    Some(c) if c == assoc.target => {}
                    Some(c) => {
                        errors.insert(role.clone(), format!("`{t}` is a {c}, expected a {}", assoc.target));
                    }
                    None if Some(t.as_str()) == own_id => {}
                    None => {
                        errors.insert(role.clone(), format!("no {} with id `{t}`", assoc.target));
                    }
                }
            }
        }
        if creating && def.is_user {
            for required in ["login", "password"] {
                if !out.contains_key(required) && !errors.contains_key(required) {
                    errors.insert(required.into(), "required for «user» objects".into());
                }
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(StoreError::Schema(errors))
        }
    }

    /// Logins are unique across every «user» class.
    fn check_user_object(&self, st: &State, batch: &[DomainObject], obj: &DomainObject) -> StoreResult<()> {
        if !self.is_user_class(&obj.class_name) {
            return Ok(());
        }
        let Some(login) = obj.fields.get("login") else { return Ok(()) };
        let clash = st
            .objects
            .values()
            .chain(batch.iter())
            .any(|o| o.id != obj.id && self.is_user_class(&o.class_name) && o.fields.get("login") == Some(login));
        if clash {
            return Err(StoreError::Schema(FieldErrors::from([(
                "login".to_string(),
                "this login is already in use".to_string(),
            )])));
        }
        Ok(())
    }

    // -- execution contexts ----------------------------------------------------

    pub fn save_context(&self, ctx: &ExecutionContext) -> StoreResult<()> {
        self.commit(Batch {
            context: Some(ContextWrite::Save(Box::new(ctx.clone()))),
            ..Batch::default()
        })
        .map(|_| ())
    }

    pub fn load_context(&self, instance_id: &str) -> StoreResult<ExecutionContext> {
        self.state()
            .contexts
            .get(instance_id)
            .cloned()
            .ok_or_else(|| StoreError::ContextNotFound(instance_id.to_string()))
    }

    /// Removes the context; the instance counts as finished afterwards.
    pub fn delete_context(&self, instance_id: &str) -> StoreResult<()> {
        if !self.state().contexts.contains_key(instance_id) {
            return Err(StoreError::ContextNotFound(instance_id.to_string()));
        }
        self.commit(Batch {
            context: Some(ContextWrite::Finish(instance_id.to_string())),
            ..Batch::default()
        })
        .map(|_| ())
    }

    /// Live contexts ordered by creation.
    pub fn list_contexts(&self) -> Vec<ExecutionContext> {
        let mut all: Vec<_> = self.state().contexts.values().cloned().collect();
        all.sort_by_key(|c| c.created_seq);
        all
    }

    pub fn is_finished(&self, instance_id: &str) -> bool {
        self.state().finished.contains(instance_id)
    }

    /// Claims exclusive access to an instance for the duration of one request.
    pub fn lock_instance(&self, instance_id: &str) -> StoreResult<InstanceGuard<'_>> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        if !busy.insert(instance_id.to_string()) {
            return Err(StoreError::Conflict(instance_id.to_string()));
        }
        Ok(InstanceGuard {
            store: self,
            instance: instance_id.to_string(),
        })
    }

    // -- notifications -----------------------------------------------------------

    pub fn inbox(&self, user: &str) -> Vec<String> {
        self.state().inbox.get(user).cloned().unwrap_or_default()
    }
}

fn object_path(dir: &Path, obj: &DomainObject) -> PathBuf {
    dir.join("objects")
        .join(&obj.class_name)
        .join(format!("{}.json", obj.id))
}

fn context_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("contexts").join(format!("{id}.json"))
}

fn write_order(class_dir: &Path, ids: &[ObjectId]) -> io::Result<()> {
    fs::create_dir_all(class_dir)?;
    let mut text = ids.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    atomic_write(&class_dir.join(".order"), text.as_bytes())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    atomic_write(path, &text)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> StoreResult<T> {
    let text = fs::read(path)?;
    serde_json::from_slice(&text).map_err(|source| StoreError::Corrupt {
        path: path.display().to_string(),
        source,
    })
}

fn remove_if_exists(path: &Path) -> io::Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::syntax::parse_class_model;

    fn schema() -> ClassModel {
        parse_class_model(fixture::CLASS_FILE, fixture::CLASS_MODEL).unwrap()
    }

    fn staff(login: &str) -> BTreeMap<String, PrimValue> {
        BTreeMap::from([
            ("login".to_string(), PrimValue::Str(login.into())),
            ("password".to_string(), PrimValue::Str("x".into())),
            ("name".to_string(), PrimValue::Str(format!("Name {login}"))),
        ])
    }

    #[test]
    fn ids_are_five_char_base36() {
        for _ in 0..100 {
            let id = random_id();
            assert_eq!(id.len(), 5);
            assert!(id.chars().all(|c| c.is_ascii_digit() || c.is_ascii_lowercase()));
        }
    }

    #[test]
    fn create_and_list() {
        let store = Store::in_memory(schema());
        let obj = store.create_object("Staff", staff("ref1"), BTreeMap::new()).unwrap();
        assert_eq!(obj.id.len(), 5);
        let all = store.load_all("Staff").unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].id, obj.id);
        assert!(store.load_all("ThesisData").unwrap().is_empty());
    }

    #[test]
    fn passwords_are_hashed_and_verified() {
        let store = Store::in_memory(schema());
        let obj = store.create_object("Staff", staff("ref1"), BTreeMap::new()).unwrap();
        let stored = match &obj.fields["password"] {
            PrimValue::Str(s) => s.clone(),
            other => panic!("{other:?}"),
        };
        assert!(stored.starts_with("sha256$"));
        assert_ne!(stored, "x");
        assert_eq!(store.authenticate("ref1", "x").unwrap(), obj.id);
        assert!(matches!(store.authenticate("ref1", "y"), Err(StoreError::AuthenticationFailed)));
        assert!(matches!(store.authenticate("nobody", "x"), Err(StoreError::AuthenticationFailed)));
    }

    #[test]
    fn malformed_email_is_rejected() {
        let store = Store::in_memory(schema());
        let mut f = staff("ref1");
        f.insert("email".into(), PrimValue::Str("not-an-email".into()));
        match store.create_object("Staff", f, BTreeMap::new()) {
            Err(StoreError::Schema(fields)) => assert!(fields.contains_key("email")),
            other => panic!("{other:?}"),
        }
        assert!(store.load_all("Staff").unwrap().is_empty());
    }

    #[test]
    fn unknown_attribute_and_type_mismatch() {
        let store = Store::in_memory(schema());
        let f = BTreeMap::from([
            ("grade1".to_string(), PrimValue::Str("A".into())),
            ("colour".to_string(), PrimValue::Int(1)),
        ]);
        match store.create_object("ThesisData", f, BTreeMap::new()) {
            Err(StoreError::Schema(fields)) => {
                assert!(fields.contains_key("grade1"));
                assert!(fields.contains_key("colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_login_is_rejected() {
        let store = Store::in_memory(schema());
        store.create_object("Staff", staff("ref1"), BTreeMap::new()).unwrap();
        match store.create_object("Staff", staff("ref1"), BTreeMap::new()) {
            Err(StoreError::Schema(fields)) => assert!(fields.contains_key("login")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn links_are_checked() {
        let store = Store::in_memory(schema());
        let s = store.create_object("Staff", staff("ref1"), BTreeMap::new()).unwrap();
        let t = store
            .create_object(
                "ThesisData",
                BTreeMap::new(),
                BTreeMap::from([("primaryRef".to_string(), vec![s.id.clone()])]),
            )
            .unwrap();
        assert_eq!(store.load("ThesisData", &t.id).unwrap().links["primaryRef"], vec![s.id.clone()]);
        let two = BTreeMap::from([("primaryRef".to_string(), vec![s.id.clone(), s.id.clone()])]);
        assert!(matches!(store.create_object("ThesisData", BTreeMap::new(), two), Err(StoreError::Schema(_))));
        let wrong = BTreeMap::from([("primaryRef".to_string(), vec![t.id.clone()])]);
        assert!(matches!(store.create_object("ThesisData", BTreeMap::new(), wrong), Err(StoreError::Schema(_))));
    }

    #[test]
    fn update_and_not_found() {
        let store = Store::in_memory(schema());
        let t = store.create_object("ThesisData", BTreeMap::new(), BTreeMap::new()).unwrap();
        store
            .update("ThesisData", &t.id, BTreeMap::from([("grade1".into(), PrimValue::Decimal(1.3))]), BTreeMap::new())
            .unwrap();
        assert_eq!(store.load("ThesisData", &t.id).unwrap().fields["grade1"], PrimValue::Decimal(1.3));
        assert!(matches!(store.load("ThesisData", "zzzzz"), Err(StoreError::NotFound { .. })));
        assert!(matches!(store.load("Staff", &t.id), Err(StoreError::NotFound { .. })));
        assert!(matches!(store.load_all("Nope"), Err(StoreError::UnknownClass(_))));
    }

    #[test]
    fn delete_cleans_up_links() {
        let store = Store::in_memory(schema());
        let a = store.create_object("Staff", staff("a"), BTreeMap::new()).unwrap();
        let b = store.create_object("Staff", staff("b"), BTreeMap::new()).unwrap();
        let t = store
            .create_object(
                "ThesisData",
                BTreeMap::new(),
                BTreeMap::from([
                    ("primaryRef".to_string(), vec![a.id.clone()]),
                    ("secondaryRef".to_string(), vec![b.id.clone()]),
                ]),
            )
            .unwrap();
        store.delete("Staff", &b.id).unwrap();
        let t = store.load("ThesisData", &t.id).unwrap();
        assert!(t.links["secondaryRef"].is_empty());
        assert_eq!(t.links["primaryRef"], vec![a.id]);
    }

    #[test]
    fn instance_lock_is_exclusive() {
        let store = Store::in_memory(schema());
        let g = store.lock_instance("abcde").unwrap();
        assert!(matches!(store.lock_instance("abcde"), Err(StoreError::Conflict(_))));
        assert!(store.lock_instance("fghij").is_ok());
        drop(g);
        assert!(store.lock_instance("abcde").is_ok());
    }

    #[test]
    fn reopen_preserves_objects_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<_> = {
            let store = Store::open(dir.path(), schema()).unwrap();
            ["c", "a", "b"]
                .iter()
                .map(|l| store.create_object("Staff", staff(l), BTreeMap::new()).unwrap().id)
                .collect()
        };
        let store = Store::open(dir.path(), schema()).unwrap();
        let reloaded: Vec<_> = store.load_all("Staff").unwrap().into_iter().map(|o| o.id).collect();
        assert_eq!(reloaded, ids);
        assert!(store.authenticate("a", "x").is_ok());
        assert!(dir.path().join("objects/Staff").join(format!("{}.json", ids[0])).exists());
    }
}
