//! The interpreting executor for linked activities.
//!
//! One token moves through an instance. Interactive actions stop it twice:
//! once before their view (rendered on GET) and once awaiting the form
//! submission (consumed on POST). Automatic actions run to completion as soon
//! as the token reaches them.
//!
//! Every operation works on a private copy of the context and buffers its
//! store writes; only a fully successful operation commits them, together
//! with the new context, in one store batch. A failed operation leaves both
//! the context and the store exactly as they were.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access;
use crate::linker::LinkedSystem;
use crate::store::{
    Batch, ContextWrite, ExecutionContext, FieldErrors, Notification, Phase, Store, StoreError, TokenPosition,
};
use crate::syntax::ast::*;
use crate::value::{conform, parse_text, DomainObject, ObjectId, PrimValue, Value};

/// Upper bound on automatic actions executed within one request.
pub const MAX_AUTOMATIC_STEPS: usize = 10_000;

const TEMP_PREFIX: &str = "tmp-";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("not permitted to {0}")]
    PermissionDenied(String),
    #[error("no activity instance `{0}`")]
    InstanceNotFound(String),
    #[error("activity instance `{0}` has completed or moved on")]
    InstanceGone(String),
    #[error("action `{action}` belongs to partition `{partition}`, which is bound to another user")]
    WrongUser { action: String, partition: String },
    #[error("action `{0}` has no view")]
    NoView(String),
    #[error("invalid submission: {}", .0.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("; "))]
    Validation(FieldErrors),
    #[error("a decision is required; choose one of {}", .0.join(", "))]
    MissingDecision(Vec<String>),
    #[error("`{0}` is an empty collection")]
    EmptyCollection(String),
    #[error("`{0}` has no value")]
    Unbound(String),
    #[error("`{0}` does not refer to an object")]
    NotAnObject(String),
    #[error("cannot link saved object `{0}` to an unsaved object; save the target first")]
    UnsavedLink(String),
    #[error("action `{0}` has no outgoing edge")]
    DeadEnd(String),
    #[error("more than {MAX_AUTOMATIC_STEPS} automatic steps; the automatic actions loop")]
    AutomaticCycle,
    #[error("the choice script ran out after {0} steps")]
    ScriptExhausted(usize),
    #[error("instance `{0}` is being modified by another request")]
    Conflict(String),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for EngineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Conflict(id) => EngineError::Conflict(id),
            StoreError::ContextNotFound(id) => EngineError::InstanceNotFound(id),
            other => EngineError::Store(other),
        }
    }
}

pub type EngineResult<T> = Result<T, EngineError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum NextStep {
    #[serde(rename_all = "camelCase")]
    Interactive {
        instance_id: String,
        action: String,
        action_id: String,
    },
    #[serde(rename_all = "camelCase")]
    Finished { instance_id: String },
}

/// User input for one interactive step.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct Submission {
    /// `param.attr` → text
    pub form: BTreeMap<String, String>,
    pub decision: Option<String>,
    pub selection: Option<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRender {
    pub instance: String,
    pub action: String,
    pub page: String,
    pub elements: Vec<RenderedElement>,
    pub decisions: Vec<String>,
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RenderedElement {
    Heading {
        level: u8,
        text: String,
    },
    Text {
        text: String,
    },
    Output {
        param: String,
        values: Vec<FieldValue>,
    },
    Input {
        param: String,
        attr: String,
        field: String,
        #[serde(rename = "type")]
        ty: String,
        value: serde_json::Value,
        editable: bool,
    },
    Table {
        param: String,
        selectable: bool,
        columns: Vec<String>,
        rows: Vec<TableRow>,
    },
}

impl RenderedElement {
    pub fn is_editable(&self) -> bool {
        matches!(self, RenderedElement::Input { editable: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldValue {
    pub attr: Option<String>,
    #[serde(rename = "type")]
    pub ty: String,
    pub value: serde_json::Value,
    pub editable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub id: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub instance_id: String,
    pub activity: String,
    pub action: String,
    pub action_id: String,
}

/// Scripted answers for [`Engine::simulate`].
#[derive(Debug, Clone, Default)]
pub struct ChoiceScript {
    pub starter: ObjectId,
    pub steps: Vec<ChoiceStep>,
}

#[derive(Debug, Clone, Default)]
pub struct ChoiceStep {
    /// Defaults to the user bound to the action's partition.
    pub user: Option<ObjectId>,
    pub form: BTreeMap<String, String>,
    /// Defaults to the first row of a selectable table.
    pub selection: Option<ObjectId>,
    pub decision: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub instance_id: String,
    pub trace: Vec<String>,
    pub notifications: Vec<Notification>,
}

/// The pieces of a render needed to check and apply a submission.
#[derive(Debug, Default)]
struct FormSpec {
    /// field → (view argument, attribute, type)
    inputs: BTreeMap<String, (String, String, BuiltinType)>,
    /// (view argument, row ids) of the first selectable table
    selection: Option<(String, Vec<ObjectId>)>,
    decisions: Vec<String>,
}

pub fn action_id(ctx: &ExecutionContext) -> String {
    format!("{}-{}", ctx.instance_id, ctx.epoch)
}

/// Splits `instance-epoch`; `None` when malformed.
pub fn parse_action_id(id: &str) -> Option<(&str, u64)> {
    let (instance, epoch) = id.rsplit_once('-')?;
    if instance.is_empty() {
        return None;
    }
    Some((instance, epoch.parse().ok()?))
}

pub struct Engine {
    system: LinkedSystem,
    store: Store,
}

impl Engine {
    pub fn new(system: LinkedSystem, store: Store) -> Self {
        Engine { system, store }
    }

    pub fn system(&self) -> &LinkedSystem {
        &self.system
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// The roles held by `user`, or the guest role when `None`.
    pub fn roles(&self, user: Option<&str>) -> BTreeSet<String> {
        let obj = user.and_then(|u| self.store.find(u));
        let has_role_attr = obj
            .as_ref()
            .and_then(|o| self.system.class(&o.class_name))
            .is_some_and(|c| c.attribute("role").is_some());
        match (user, obj) {
            (Some(_), None) => BTreeSet::new(),
            (_, obj) => access::roles_of(&self.system.app, obj.as_ref(), has_role_attr),
        }
    }

    pub fn start_activity(&self, activity: &str, user: &str) -> EngineResult<(ExecutionContext, NextStep)> {
        let (ctx, next, _) = self.start_traced(activity, user)?;
        Ok((ctx, next))
    }

    fn start_traced(&self, activity: &str, user: &str) -> EngineResult<(ExecutionContext, NextStep, Outcome)> {
        let act = self
            .system
            .activity(activity)
            .ok_or_else(|| EngineError::UnknownActivity(activity.to_string()))?;
        let roles = self.roles(Some(user));
        if !access::permits(&self.system.app, &roles, &EntryRef::Activity(activity.to_string())) {
            return Err(EngineError::PermissionDenied(format!("start `{activity}`")));
        }
        let ctx = ExecutionContext {
            instance_id: self.store.reserve_id(),
            activity_name: activity.to_string(),
            token: TokenPosition::Completed,
            bindings: BTreeMap::new(),
            role_bindings: BTreeMap::new(),
            transient_objects: BTreeMap::new(),
            started_by: user.to_string(),
            notifications: Vec::new(),
            epoch: 0,
            created_seq: self.store.next_seq(),
            next_temp: 1,
        };
        let mut run = Run::new(self, act, ctx, user);
        let edge = act
            .initial_edge()
            .ok_or_else(|| EngineError::DeadEnd("initial".to_string()))?;
        if let Some(first) = edge.targets.first().and_then(|t| t.node.action()) {
            if let Some(partition) = self.system.partition_of(activity, first) {
                run.ctx.role_bindings.insert(partition.to_string(), user.to_string());
            }
        }
        let next = run.traverse(edge, None, None)?;
        let ctx = run.ctx.clone();
        let outcome = run.commit(&next)?;
        Ok((ctx, next, outcome))
    }

    /// Maps an action id to its instance, rejecting stale or unknown ids.
    pub fn resolve_action_id(&self, action_id: &str) -> EngineResult<String> {
        let (instance, epoch) =
            parse_action_id(action_id).ok_or_else(|| EngineError::InstanceNotFound(action_id.to_string()))?;
        let ctx = self.load_live(instance)?;
        if ctx.epoch != epoch {
            return Err(EngineError::InstanceGone(action_id.to_string()));
        }
        Ok(instance.to_string())
    }

    fn load_live(&self, instance: &str) -> EngineResult<ExecutionContext> {
        match self.store.load_context(instance) {
            Ok(ctx) => Ok(ctx),
            Err(StoreError::ContextNotFound(_)) if self.store.is_finished(instance) => {
                Err(EngineError::InstanceGone(instance.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Loads `instance` under its lock and checks the user against the
    /// token's partition. `epoch`, when given, must match the context.
    fn open_instance(
        &self,
        instance: &str,
        user: &str,
        epoch: Option<u64>,
    ) -> EngineResult<(ExecutionContext, String, Phase)> {
        let ctx = self.load_live(instance)?;
        if epoch.is_some_and(|e| e != ctx.epoch) {
            return Err(EngineError::InstanceGone(format!("{instance}-{}", epoch.unwrap_or_default())));
        }
        let (action, phase) = match &ctx.token {
            TokenPosition::AtAction { action, phase } => (action.clone(), *phase),
            TokenPosition::Completed => return Err(EngineError::InstanceGone(instance.to_string())),
        };
        let act = self
            .system
            .activity(&ctx.activity_name)
            .ok_or_else(|| EngineError::UnknownActivity(ctx.activity_name.clone()))?;
        let def = act.action(&action).ok_or_else(|| EngineError::NoView(action.clone()))?;
        if !def.is_interactive() {
            return Err(EngineError::NoView(action));
        }
        let partition = self
            .system
            .partition_of(&ctx.activity_name, &action)
            .ok_or_else(|| EngineError::NoView(action.clone()))?;
        if ctx.role_bindings.get(partition).map(String::as_str) != Some(user) {
            return Err(EngineError::WrongUser {
                action,
                partition: partition.to_string(),
            });
        }
        Ok((ctx, action, phase))
    }

    pub fn render_action(&self, instance: &str, user: &str) -> EngineResult<PageRender> {
        self.render_inner(instance, user, None)
    }

    pub fn render_by_action_id(&self, action_id: &str, user: &str) -> EngineResult<PageRender> {
        let (instance, epoch) =
            parse_action_id(action_id).ok_or_else(|| EngineError::InstanceNotFound(action_id.to_string()))?;
        self.render_inner(instance, user, Some(epoch))
    }

    fn render_inner(&self, instance: &str, user: &str, epoch: Option<u64>) -> EngineResult<PageRender> {
        let _guard = self.store.lock_instance(instance)?;
        let (ctx, action, phase) = self.open_instance(instance, user, epoch)?;
        let act = self.activity_of(&ctx)?;
        let def = act.action(&action).ok_or_else(|| EngineError::NoView(action.clone()))?;
        let mut run = Run::new(self, act, ctx, user);
        if phase == Phase::BeforeView {
            run.run_pre_view(def)?;
        }
        let (render, _) = run.build_render(def)?;
        if phase == Phase::BeforeView {
            run.set_phase(&action, Phase::AwaitingSubmit);
            let next = NextStep::Interactive {
                instance_id: instance.to_string(),
                action_id: action_id(&run.ctx),
                action,
            };
            run.commit(&next)?;
        }
        Ok(render)
    }

    pub fn submit_action(&self, instance: &str, user: &str, submission: &Submission) -> EngineResult<NextStep> {
        self.submit_inner(instance, user, submission, None).map(|(n, _)| n)
    }

    pub fn submit_by_action_id(&self, action_id: &str, user: &str, submission: &Submission) -> EngineResult<NextStep> {
        let (instance, epoch) =
            parse_action_id(action_id).ok_or_else(|| EngineError::InstanceNotFound(action_id.to_string()))?;
        self.submit_inner(instance, user, submission, Some(epoch)).map(|(n, _)| n)
    }

    fn submit_inner(
        &self,
        instance: &str,
        user: &str,
        submission: &Submission,
        epoch: Option<u64>,
    ) -> EngineResult<(NextStep, Outcome)> {
        let _guard = self.store.lock_instance(instance)?;
        let (ctx, action, phase) = self.open_instance(instance, user, epoch)?;
        let act = self.activity_of(&ctx)?;
        let def = act.action(&action).ok_or_else(|| EngineError::NoView(action.clone()))?;
        let mut run = Run::new(self, act, ctx, user);
        if phase == Phase::BeforeView {
            run.run_pre_view(def)?;
        }
        let (_, spec) = run.build_render(def)?;
        run.apply_submission(&spec, submission)?;
        run.run_post_view(def)?;
        let edge = act
            .outgoing(&action)
            .ok_or_else(|| EngineError::DeadEnd(action.clone()))?;
        let next = run.traverse(edge, Some(&action), submission.decision.as_deref())?;
        let outcome = run.commit(&next)?;
        Ok((next, outcome))
    }

    fn activity_of(&self, ctx: &ExecutionContext) -> EngineResult<&ActivityModel> {
        self.system
            .activity(&ctx.activity_name)
            .ok_or_else(|| EngineError::UnknownActivity(ctx.activity_name.clone()))
    }

    /// Live instances waiting on `user`, oldest first.
    pub fn list_tasks(&self, user: &str) -> Vec<Task> {
        self.store
            .list_contexts()
            .into_iter()
            .filter_map(|ctx| {
                let TokenPosition::AtAction { action, .. } = &ctx.token else { return None };
                let partition = self.system.partition_of(&ctx.activity_name, action)?;
                (ctx.role_bindings.get(partition).map(String::as_str) == Some(user)).then(|| Task {
                    instance_id: ctx.instance_id.clone(),
                    activity: ctx.activity_name.clone(),
                    action: action.clone(),
                    action_id: action_id(&ctx),
                })
            })
            .collect()
    }

    /// Runs an activity to completion with scripted answers, returning every
    /// action visited (automatic ones included) and the notifications sent.
    pub fn simulate(&self, activity: &str, script: &ChoiceScript) -> EngineResult<Simulation> {
        let (ctx, mut next, outcome) = self.start_traced(activity, &script.starter)?;
        let mut trace = outcome.trace;
        let mut notifications = outcome.notifications;
        let mut steps = script.steps.iter();
        let mut taken = 0;
        while let NextStep::Interactive { instance_id, action, .. } = &next {
            let step = steps.next().ok_or(EngineError::ScriptExhausted(taken))?;
            taken += 1;
            let user = match &step.user {
                Some(u) => u.clone(),
                None => {
                    let current = self.store.load_context(instance_id)?;
                    let partition = self.system.partition_of(activity, action).unwrap_or_default();
                    current.role_bindings.get(partition).cloned().unwrap_or_default()
                }
            };
            let render = self.render_action(instance_id, &user)?;
            let selection = step.selection.clone().or_else(|| {
                render.elements.iter().find_map(|e| match e {
                    RenderedElement::Table { selectable: true, rows, .. } => rows.first().map(|r| r.id.clone()),
                    _ => None,
                })
            });
            let submission = Submission {
                form: step.form.clone(),
                decision: step.decision.clone(),
                selection,
            };
            let (n, outcome) = self.submit_inner(instance_id, &user, &submission, None)?;
            trace.extend(outcome.trace);
            notifications.extend(outcome.notifications);
            next = n;
        }
        Ok(Simulation {
            instance_id: ctx.instance_id,
            trace,
            notifications,
        })
    }
}

#[derive(Debug, Default)]
struct Outcome {
    trace: Vec<String>,
    notifications: Vec<Notification>,
}

/// Working state for one engine operation on one instance.
struct Run<'e> {
    engine: &'e Engine,
    activity: &'e ActivityModel,
    ctx: ExecutionContext,
    requester: ObjectId,
    created: Vec<DomainObject>,
    updates: BTreeMap<ObjectId, (BTreeMap<String, PrimValue>, BTreeMap<String, Vec<ObjectId>>)>,
    notifications: Vec<Notification>,
    trace: Vec<String>,
}

fn is_temp(key: &str) -> bool {
    key.starts_with(TEMP_PREFIX)
}

fn ref_value(key: &str) -> Value {
    if is_temp(key) {
        Value::TempRef(key.to_string())
    } else {
        Value::Ref(key.to_string())
    }
}

fn bind_key(action: &str, name: &str) -> String {
    format!("{action}.{name}")
}

fn display(value: Option<&Value>) -> serde_json::Value {
    match value {
        None => serde_json::Value::Null,
        Some(Value::Prim(p)) => p.to_json(),
        Some(Value::Ref(k)) | Some(Value::TempRef(k)) => serde_json::Value::String(k.clone()),
        Some(Value::SetOf(items)) => serde_json::Value::Array(items.iter().map(|v| display(Some(v))).collect()),
    }
}

fn rewrite(value: &mut Value, ids: &HashMap<String, ObjectId>) {
    match value {
        Value::TempRef(k) => {
            if let Some(id) = ids.get(k) {
                *value = Value::Ref(id.clone());
            }
        }
        Value::SetOf(items) => items.iter_mut().for_each(|v| rewrite(v, ids)),
        _ => {}
    }
}

fn rewrite_links(obj: &mut DomainObject, ids: &HashMap<String, ObjectId>) {
    for targets in obj.links.values_mut() {
        for t in targets.iter_mut() {
            if let Some(id) = ids.get(t) {
                *t = id.clone();
            }
        }
    }
}

/// Comparable view of a guard operand.
#[derive(Debug, Clone)]
enum Scalar {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Obj(String),
    Set(Vec<Scalar>),
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        use Scalar::*;
        match (self, other) {
            (Null, Null) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Int(a), Num(b)) | (Num(b), Int(a)) => (*a as f64) == *b,
            (Num(a), Num(b)) => a == b,
            (Str(a), Str(b)) | (Obj(a), Obj(b)) => a == b,
            (Set(a), Set(b)) => a == b,
            _ => false,
        }
    }
}

impl From<&Value> for Scalar {
    fn from(v: &Value) -> Self {
        match v {
            Value::Prim(PrimValue::Bool(b)) => Scalar::Bool(*b),
            Value::Prim(PrimValue::Int(i)) => Scalar::Int(*i),
            Value::Prim(PrimValue::Decimal(d)) => Scalar::Num(*d),
            Value::Prim(PrimValue::Str(s)) => Scalar::Str(s.clone()),
            Value::Ref(k) | Value::TempRef(k) => Scalar::Obj(k.clone()),
            Value::SetOf(items) => Scalar::Set(items.iter().map(Scalar::from).collect()),
        }
    }
}

impl<'e> Run<'e> {
    fn new(engine: &'e Engine, activity: &'e ActivityModel, ctx: ExecutionContext, requester: &str) -> Self {
        Run {
            engine,
            activity,
            ctx,
            requester: requester.to_string(),
            created: Vec::new(),
            updates: BTreeMap::new(),
            notifications: Vec::new(),
            trace: Vec::new(),
        }
    }

    fn system(&self) -> &'e LinkedSystem {
        &self.engine.system
    }

    fn set_phase(&mut self, action: &str, phase: Phase) {
        self.ctx.token = TokenPosition::AtAction {
            action: action.to_string(),
            phase,
        };
    }

    /// Writes the buffered effects and the context (or its removal).
    fn commit(self, next: &NextStep) -> EngineResult<Outcome> {
        let context = match next {
            NextStep::Finished { instance_id } => ContextWrite::Finish(instance_id.clone()),
            NextStep::Interactive { .. } => ContextWrite::Save(Box::new(self.ctx)),
        };
        self.engine.store.commit(Batch {
            creates: self.created,
            updates: self
                .updates
                .into_iter()
                .map(|(id, (fields, links))| (id, fields, links))
                .collect(),
            notifications: self.notifications.clone(),
            context: Some(context),
        })?;
        Ok(Outcome {
            trace: self.trace,
            notifications: self.notifications,
        })
    }

    // -- bindings and objects ----------------------------------------------------

    fn binding(&self, action: &str, name: &str) -> EngineResult<&Value> {
        self.ctx
            .bindings
            .get(&bind_key(action, name))
            .ok_or_else(|| EngineError::Unbound(bind_key(action, name)))
    }

    fn object_key(&self, action: &str, name: &str) -> EngineResult<String> {
        match self.binding(action, name)? {
            Value::Ref(k) | Value::TempRef(k) => Ok(k.clone()),
            _ => Err(EngineError::NotAnObject(bind_key(action, name))),
        }
    }

    /// The current state of an object, including unsaved changes.
    fn object(&self, key: &str) -> EngineResult<DomainObject> {
        if is_temp(key) {
            return self
                .ctx
                .transient_objects
                .get(key)
                .cloned()
                .ok_or_else(|| EngineError::Unbound(key.to_string()));
        }
        if let Some(obj) = self.created.iter().find(|o| o.id == key) {
            return Ok(obj.clone());
        }
        let mut obj = self
            .engine
            .store
            .find(key)
            .ok_or_else(|| EngineError::Store(StoreError::NotFound {
                class: "object".into(),
                id: key.to_string(),
            }))?;
        if let Some((fields, links)) = self.updates.get(key) {
            obj.fields.extend(fields.clone());
            obj.links.extend(links.clone());
        }
        Ok(obj)
    }

    fn set_field(&mut self, key: &str, attr: &str, value: PrimValue) {
        if let Some(obj) = self.ctx.transient_objects.get_mut(key) {
            obj.fields.insert(attr.to_string(), value);
        } else if let Some(obj) = self.created.iter_mut().find(|o| o.id == key) {
            obj.fields.insert(attr.to_string(), value);
        } else {
            self.updates.entry(key.to_string()).or_default().0.insert(attr.to_string(), value);
        }
    }

    fn set_links(&mut self, key: &str, role: &str, targets: Vec<ObjectId>) -> EngineResult<()> {
        if let Some(obj) = self.ctx.transient_objects.get_mut(key) {
            obj.links.insert(role.to_string(), targets);
            return Ok(());
        }
        if let Some(t) = targets.iter().find(|t| is_temp(t)) {
            return Err(EngineError::UnsavedLink(format!("{key} -> {t}")));
        }
        if let Some(obj) = self.created.iter_mut().find(|o| o.id == key) {
            obj.links.insert(role.to_string(), targets);
        } else {
            self.updates.entry(key.to_string()).or_default().1.insert(role.to_string(), targets);
        }
        Ok(())
    }

    fn read_attr(&self, obj: &DomainObject, attr: &str) -> Option<Value> {
        let class = self.system().class(&obj.class_name)?;
        if class.attribute(attr).is_some() {
            return obj.fields.get(attr).cloned().map(Value::Prim);
        }
        let assoc = class.association(attr)?;
        let targets = obj.links.get(attr).cloned().unwrap_or_default();
        match assoc.multiplicity {
            Multiplicity::One => targets.first().map(|k| ref_value(k)),
            Multiplicity::Many => Some(Value::SetOf(targets.iter().map(|k| ref_value(k)).collect())),
        }
    }

    // -- statements ----------------------------------------------------------------

    fn run_pre_view(&mut self, def: &ActionDef) -> EngineResult<()> {
        let end = def.view_index().unwrap_or(def.body.len());
        for stmt in &def.body[..end] {
            self.exec(&def.name, stmt)?;
        }
        Ok(())
    }

    fn run_post_view(&mut self, def: &ActionDef) -> EngineResult<()> {
        let start = def.view_index().map_or(def.body.len(), |i| i + 1);
        for stmt in &def.body[start..] {
            self.exec(&def.name, stmt)?;
        }
        Ok(())
    }

    fn exec(&mut self, action: &str, stmt: &Statement) -> EngineResult<()> {
        match &stmt.kind {
            StatementKind::View { .. } => Ok(()),
            StatementKind::Cmd(cmd) => self.exec_command(action, cmd),
            StatementKind::Script(stmts) => {
                for s in stmts {
                    self.exec_script(action, s)?;
                }
                Ok(())
            }
        }
    }

    fn exec_command(&mut self, action: &str, cmd: &Command) -> EngineResult<()> {
        match cmd {
            Command::LoadAll { assign_to, class } => {
                let mut items: Vec<Value> = self
                    .engine
                    .store
                    .load_all(class)?
                    .into_iter()
                    .map(|o| Value::Ref(o.id))
                    .collect();
                items.extend(
                    self.created
                        .iter()
                        .filter(|o| &o.class_name == class)
                        .map(|o| Value::Ref(o.id.clone())),
                );
                self.ctx.bindings.insert(bind_key(action, assign_to), Value::SetOf(items));
            }
            Command::GetActualUser { assign_to } => {
                self.ctx
                    .bindings
                    .insert(bind_key(action, assign_to), Value::Ref(self.requester.clone()));
            }
            Command::AssignRole { partition, user } => match self.binding(action, user)? {
                Value::Ref(id) => {
                    let id = id.clone();
                    self.ctx.role_bindings.insert(partition.clone(), id);
                }
                _ => return Err(EngineError::NotAnObject(bind_key(action, user))),
            },
            Command::Save { target } => {
                let value = self.binding(action, target)?.clone();
                self.save_value(&value, &bind_key(action, target))?;
            }
            Command::Notify { message } => {
                let mut seen = HashSet::new();
                let users: Vec<ObjectId> = self
                    .ctx
                    .role_bindings
                    .values()
                    .filter(|u| seen.insert(u.as_str()))
                    .cloned()
                    .collect();
                for user in users {
                    let n = Notification {
                        user,
                        message: message.clone(),
                    };
                    self.ctx.notifications.push(n.clone());
                    self.notifications.push(n);
                }
            }
        }
        Ok(())
    }

    fn save_value(&mut self, value: &Value, name: &str) -> EngineResult<()> {
        match value {
            Value::TempRef(k) => self.persist(k),
            // changes to saved objects are already buffered for commit
            Value::Ref(_) => Ok(()),
            Value::SetOf(items) => {
                for v in items {
                    let v = self.current(v);
                    self.save_value(&v, name)?;
                }
                Ok(())
            }
            Value::Prim(_) => Err(EngineError::NotAnObject(name.to_string())),
        }
    }

    /// A set element may have been saved (and rewritten) by an earlier element.
    fn current(&self, v: &Value) -> Value {
        match v {
            Value::TempRef(k) if !self.ctx.transient_objects.contains_key(k) => self
                .created
                .iter()
                .find(|o| o.id == *k)
                .map_or_else(|| v.clone(), |o| Value::Ref(o.id.clone())),
            _ => v.clone(),
        }
    }

    /// Persists a transient object together with every transient object it
    /// links to, and rewrites all references to them.
    fn persist(&mut self, root: &str) -> EngineResult<()> {
        if !self.ctx.transient_objects.contains_key(root) {
            return Ok(());
        }
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![root.to_string()];
        while let Some(k) = stack.pop() {
            if !seen.insert(k.clone()) {
                continue;
            }
            let Some(obj) = self.ctx.transient_objects.get(&k) else { continue };
            stack.extend(obj.links.values().flatten().filter(|t| is_temp(t)).cloned());
            order.push(k);
        }
        let ids: HashMap<String, ObjectId> = order
            .iter()
            .map(|k| (k.clone(), self.engine.store.reserve_id()))
            .collect();
        for k in &order {
            if let Some(mut obj) = self.ctx.transient_objects.remove(k) {
                obj.id = ids[k].clone();
                rewrite_links(&mut obj, &ids);
                self.created.push(obj);
            }
        }
        for obj in self.ctx.transient_objects.values_mut() {
            rewrite_links(obj, &ids);
        }
        for v in self.ctx.bindings.values_mut() {
            rewrite(v, &ids);
        }
        Ok(())
    }

    fn eval(&mut self, action: &str, expr: &Expr) -> EngineResult<Option<Value>> {
        match expr {
            Expr::Var(n) => Ok(Some(self.binding(action, n)?.clone())),
            Expr::New(class) => {
                let key = format!("{TEMP_PREFIX}{}", self.ctx.next_temp);
                self.ctx.next_temp += 1;
                self.ctx
                    .transient_objects
                    .insert(key.clone(), DomainObject::new(class.clone(), key.clone()));
                Ok(Some(Value::TempRef(key)))
            }
            Expr::Get { receiver, attr } => {
                let key = self.object_key(action, receiver)?;
                let obj = self.object(&key)?;
                Ok(self.read_attr(&obj, attr))
            }
            Expr::FirstOf(n) => match self.binding(action, n)? {
                Value::SetOf(items) => items
                    .first()
                    .cloned()
                    .map(Some)
                    .ok_or_else(|| EngineError::EmptyCollection(n.clone())),
                _ => Err(EngineError::NotAnObject(bind_key(action, n))),
            },
        }
    }

    fn exec_script(&mut self, action: &str, stmt: &ScriptStmt) -> EngineResult<()> {
        match &stmt.kind {
            ScriptKind::Assign { lhs, rhs } => {
                let key = bind_key(action, lhs);
                match self.eval(action, rhs)? {
                    Some(v) => {
                        self.ctx.bindings.insert(key, v);
                    }
                    None => {
                        self.ctx.bindings.remove(&key);
                    }
                }
            }
            ScriptKind::Invoke { receiver, attr, arg } => {
                let key = self.object_key(action, receiver)?;
                let obj = self.object(&key)?;
                let value = self.eval(action, arg)?;
                let class = self
                    .system()
                    .class(&obj.class_name)
                    .ok_or_else(|| EngineError::NotAnObject(bind_key(action, receiver)))?;
                if let Some(a) = class.attribute(attr) {
                    let Some(Value::Prim(p)) = value else {
                        return Err(EngineError::Unbound(format!("argument of {receiver}.{attr}")));
                    };
                    let p = conform(a.ty, p).map_err(|m| EngineError::Validation(FieldErrors::from([(attr.clone(), m)])))?;
                    self.set_field(&key, attr, p);
                } else if let Some(assoc) = class.association(attr) {
                    let mut targets = match (&value, assoc.multiplicity) {
                        (Some(Value::SetOf(items)), _) => {
                            items.iter().filter_map(|v| v.object_key().map(str::to_string)).collect()
                        }
                        (Some(v), _) => vec![v
                            .object_key()
                            .ok_or_else(|| EngineError::NotAnObject(format!("argument of {receiver}.{attr}")))?
                            .to_string()],
                        (None, _) => Vec::new(),
                    };
                    if assoc.multiplicity == Multiplicity::Many && !matches!(value, Some(Value::SetOf(_)) | None) {
                        let mut existing = obj.links.get(attr).cloned().unwrap_or_default();
                        existing.append(&mut targets);
                        targets = existing;
                    }
                    self.set_links(&key, attr, targets)?;
                } else {
                    return Err(EngineError::NotAnObject(format!("{receiver}.{attr}")));
                }
            }
        }
        Ok(())
    }

    // -- edges ------------------------------------------------------------------------

    fn guard_holds(&self, action: Option<&str>, guard: &Guard) -> bool {
        match guard {
            Guard::Literal(b) => *b,
            Guard::Not(g) => !self.guard_holds(action, g),
            Guard::And(gs) => gs.iter().all(|g| self.guard_holds(action, g)),
            Guard::Or(gs) => gs.iter().any(|g| self.guard_holds(action, g)),
            Guard::Compare { left, op, right } => {
                let eq = self.operand(action, left) == self.operand(action, right);
                match op {
                    CompareOp::Eq => eq,
                    CompareOp::Ne => !eq,
                }
            }
        }
    }

    fn operand(&self, action: Option<&str>, op: &Operand) -> Scalar {
        let lookup = |name: &str| action.and_then(|a| self.ctx.bindings.get(&bind_key(a, name)));
        match op {
            Operand::Literal(Literal::Null) => Scalar::Null,
            Operand::Literal(Literal::Bool(b)) => Scalar::Bool(*b),
            Operand::Literal(Literal::Int(i)) => Scalar::Int(*i),
            Operand::Literal(Literal::Decimal(d)) => Scalar::Num(*d),
            Operand::Literal(Literal::Str(s)) => Scalar::Str(s.clone()),
            Operand::Var(n) => lookup(n).map_or(Scalar::Null, Scalar::from),
            Operand::Get { receiver, attr } => lookup(receiver)
                .and_then(Value::object_key)
                .and_then(|k| self.object(k).ok())
                .and_then(|o| self.read_attr(&o, attr))
                .as_ref()
                .map_or(Scalar::Null, Scalar::from),
        }
    }

    /// Labels offered to the user on `edge`: its unguarded targets when it is a decision.
    fn options(edge: &EdgeDef) -> Vec<String> {
        if !edge.is_decision() {
            return Vec::new();
        }
        edge.targets
            .iter()
            .filter(|t| t.guard.is_none())
            .map(|t| t.node.label().to_string())
            .collect()
    }

    fn choose<'a>(&self, edge: &'a EdgeDef, source: Option<&str>, choice: Option<&str>) -> EngineResult<&'a EdgeTarget> {
        if !edge.is_decision() {
            return edge
                .targets
                .first()
                .ok_or_else(|| EngineError::DeadEnd(source.unwrap_or("initial").to_string()));
        }
        if let Some(t) = edge
            .targets
            .iter()
            .find(|t| t.guard.as_ref().is_some_and(|g| self.guard_holds(source, g)))
        {
            return Ok(t);
        }
        let options = Self::options(edge);
        let Some(choice) = choice else {
            return Err(EngineError::MissingDecision(options));
        };
        edge.targets
            .iter()
            .find(|t| t.guard.is_none() && t.node.label() == choice)
            .ok_or_else(|| {
                EngineError::Validation(FieldErrors::from([(
                    "_decision".to_string(),
                    format!("`{choice}` is not one of {}", options.join(", ")),
                )]))
            })
    }

    /// Moves the token along `edge` and on through automatic actions until an
    /// interactive action or `final` is reached.
    fn traverse(&mut self, edge: &'e EdgeDef, source: Option<&str>, choice: Option<&str>) -> EngineResult<NextStep> {
        let mut edge = edge;
        let mut source = source.map(str::to_string);
        let mut choice = choice;
        let mut steps = 0usize;
        loop {
            let target = self.choose(edge, source.as_deref(), choice.take())?;
            let value = match (edge.source.pin(), &source) {
                (Some(pin), Some(src)) => Some(self.binding(src, pin)?.clone()),
                _ => None,
            };
            let (action, pin) = match &target.node {
                NodeRef::Final | NodeRef::Initial => {
                    self.ctx.token = TokenPosition::Completed;
                    return Ok(NextStep::Finished {
                        instance_id: self.ctx.instance_id.clone(),
                    });
                }
                NodeRef::Action { action, pin } => (action, pin),
            };
            let def = self
                .activity
                .action(action)
                .ok_or_else(|| EngineError::DeadEnd(action.clone()))?;
            let prefix = format!("{action}.");
            self.ctx.bindings.retain(|k, _| !k.starts_with(&prefix));
            if let (Some(pin), Some(v)) = (pin, value) {
                self.ctx.bindings.insert(bind_key(action, pin), v);
            }
            self.trace.push(action.clone());
            self.set_phase(action, Phase::BeforeView);
            if def.is_interactive() {
                self.ctx.epoch += 1;
                if let Some(partition) = self.system().partition_of(&self.activity.name, action) {
                    self.ctx
                        .role_bindings
                        .entry(partition.to_string())
                        .or_insert_with(|| self.requester.clone());
                }
                return Ok(NextStep::Interactive {
                    instance_id: self.ctx.instance_id.clone(),
                    action: action.clone(),
                    action_id: action_id(&self.ctx),
                });
            }
            steps += 1;
            if steps > MAX_AUTOMATIC_STEPS {
                return Err(EngineError::AutomaticCycle);
            }
            for stmt in &def.body {
                self.exec(action, stmt)?;
            }
            edge = self
                .activity
                .outgoing(action)
                .ok_or_else(|| EngineError::DeadEnd(action.clone()))?;
            source = Some(action.clone());
        }
    }

    // -- pages -------------------------------------------------------------------------

    fn build_render(&self, def: &ActionDef) -> EngineResult<(PageRender, FormSpec)> {
        let (page_name, args) = def
            .body
            .iter()
            .find_map(|s| match &s.kind {
                StatementKind::View { page, args } => Some((page, args)),
                _ => None,
            })
            .ok_or_else(|| EngineError::NoView(def.name.clone()))?;
        let page = self
            .system()
            .page(page_name)
            .ok_or_else(|| EngineError::NoView(def.name.clone()))?;
        // page parameter → action variable
        let arg_of: HashMap<&str, &str> = page
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (p.name.as_str(), a.as_str()))
            .collect();
        let value_of = |param: &str| -> Option<&Value> {
            arg_of
                .get(param)
                .and_then(|a| self.ctx.bindings.get(&bind_key(&def.name, a)))
        };

        let mut spec = FormSpec::default();
        let mut elements = Vec::new();
        for el in &page.elements {
            elements.push(match &el.kind {
                ElementKind::Heading { level, text } => RenderedElement::Heading {
                    level: *level,
                    text: text.clone(),
                },
                ElementKind::Text(text) => RenderedElement::Text { text: text.clone() },
                ElementKind::Output { param, attr } => RenderedElement::Output {
                    param: param.clone(),
                    values: self.output_values(page.param(param), value_of(param), attr.as_deref())?,
                },
                ElementKind::Input { param, attr } => {
                    let key = match value_of(param) {
                        Some(Value::Ref(k)) | Some(Value::TempRef(k)) => k.clone(),
                        Some(_) => return Err(EngineError::NotAnObject(param.clone())),
                        None => return Err(EngineError::Unbound(param.clone())),
                    };
                    let obj = self.object(&key)?;
                    let ty = self
                        .system()
                        .class(&obj.class_name)
                        .and_then(|c| c.attribute(attr))
                        .map(|a| a.ty)
                        .ok_or_else(|| EngineError::NotAnObject(format!("{param}.{attr}")))?;
                    let field = format!("{param}.{attr}");
                    let secret = self.is_secret(&obj.class_name, attr);
                    spec.inputs.insert(
                        field.clone(),
                        (arg_of.get(param.as_str()).copied().unwrap_or_default().to_string(), attr.clone(), ty),
                    );
                    RenderedElement::Input {
                        param: param.clone(),
                        attr: attr.clone(),
                        field,
                        ty: ty.name().to_string(),
                        value: if secret {
                            serde_json::Value::Null
                        } else {
                            display(obj.fields.get(attr).cloned().map(Value::Prim).as_ref())
                        },
                        editable: true,
                    }
                }
                ElementKind::Table {
                    param,
                    selectable,
                    columns,
                } => {
                    let items = match value_of(param) {
                        Some(Value::SetOf(items)) => items.clone(),
                        Some(_) => return Err(EngineError::NotAnObject(param.clone())),
                        None => return Err(EngineError::Unbound(param.clone())),
                    };
                    let class = match &page.param(param).map(|p| &p.ty) {
                        Some(TypeRef::SetOf(c)) => self.system().class(c),
                        _ => None,
                    };
                    let columns: Vec<String> = if columns.is_empty() {
                        class
                            .map(|c| {
                                c.attributes
                                    .iter()
                                    .filter(|a| !self.is_secret(&c.name, &a.name))
                                    .map(|a| a.name.clone())
                                    .collect()
                            })
                            .unwrap_or_default()
                    } else {
                        columns.clone()
                    };
                    let mut rows = Vec::new();
                    for item in &items {
                        let key = item
                            .object_key()
                            .ok_or_else(|| EngineError::NotAnObject(param.clone()))?;
                        let obj = self.object(key)?;
                        rows.push(TableRow {
                            id: key.to_string(),
                            values: columns
                                .iter()
                                .map(|c| {
                                    if self.is_secret(&obj.class_name, c) {
                                        serde_json::Value::Null
                                    } else {
                                        display(self.read_attr(&obj, c).as_ref())
                                    }
                                })
                                .collect(),
                        });
                    }
                    if *selectable && spec.selection.is_none() {
                        spec.selection = Some((
                            arg_of.get(param.as_str()).copied().unwrap_or_default().to_string(),
                            rows.iter().map(|r| r.id.clone()).collect(),
                        ));
                    }
                    RenderedElement::Table {
                        param: param.clone(),
                        selectable: *selectable,
                        columns,
                        rows,
                    }
                }
            });
        }
        spec.decisions = self.activity.outgoing(&def.name).map(Self::options).unwrap_or_default();
        let render = PageRender {
            instance: self.ctx.instance_id.clone(),
            action: def.name.clone(),
            page: page.name.clone(),
            elements,
            decisions: spec.decisions.clone(),
            fields: spec
                .inputs
                .iter()
                .map(|(f, (_, _, ty))| (f.clone(), ty.name().to_string()))
                .collect(),
        };
        Ok((render, spec))
    }

    fn is_secret(&self, class: &str, attr: &str) -> bool {
        attr == "password" && self.system().class(class).is_some_and(|c| c.is_user)
    }

    fn output_values(
        &self,
        decl: Option<&ParamDecl>,
        value: Option<&Value>,
        attr: Option<&str>,
    ) -> EngineResult<Vec<FieldValue>> {
        let field = |attr: Option<&str>, ty: String, value: serde_json::Value| FieldValue {
            attr: attr.map(str::to_string),
            ty,
            value,
            editable: false,
        };
        match (value, attr) {
            (Some(Value::Ref(k)) | Some(Value::TempRef(k)), attr) => {
                let obj = self.object(k)?;
                let Some(class) = self.system().class(&obj.class_name) else { return Ok(Vec::new()) };
                let mut out = Vec::new();
                for a in &class.attributes {
                    if attr.is_some_and(|x| x != a.name) || self.is_secret(&class.name, &a.name) {
                        continue;
                    }
                    let v = obj.fields.get(&a.name).cloned().map(Value::Prim);
                    out.push(field(Some(&a.name), a.ty.name().to_string(), display(v.as_ref())));
                }
                for r in &class.associations {
                    if attr.is_some_and(|x| x != r.role) {
                        continue;
                    }
                    out.push(field(Some(&r.role), r.target.clone(), display(self.read_attr(&obj, &r.role).as_ref())));
                }
                Ok(out)
            }
            (v, _) => {
                let ty = decl.map(|d| d.ty.to_string()).unwrap_or_default();
                Ok(vec![field(None, ty, display(v))])
            }
        }
    }

    /// Checks a submission against the rendered form and writes it back.
    fn apply_submission(&mut self, spec: &FormSpec, submission: &Submission) -> EngineResult<()> {
        let mut errors = FieldErrors::new();
        let mut parsed = Vec::new();
        for (field, (arg, attr, ty)) in &spec.inputs {
            match submission.form.get(field) {
                None => {
                    errors.insert(field.clone(), "a value is required".into());
                }
                Some(text) => match parse_text(*ty, text) {
                    Ok(v) => parsed.push((arg.clone(), attr.clone(), v)),
                    Err(m) => {
                        errors.insert(field.clone(), m);
                    }
                },
            }
        }
        for field in submission.form.keys() {
            if !field.starts_with('_') && !spec.inputs.contains_key(field) {
                errors.insert(field.clone(), "this page has no such field".into());
            }
        }
        match (&spec.selection, &submission.selection) {
            (Some((_, rows)), None) if !rows.is_empty() => {
                errors.insert("_selection".into(), "select one row".into());
            }
            (Some((_, rows)), Some(sel)) if !rows.contains(sel) => {
                errors.insert("_selection".into(), format!("`{sel}` is not a row of the table"));
            }
            (None, Some(_)) => {
                errors.insert("_selection".into(), "this page has no selectable table".into());
            }
            _ => {}
        }
        if let Some(d) = &submission.decision {
            if spec.decisions.is_empty() {
                errors.insert("_decision".into(), "no decision is offered here".into());
            } else if !spec.decisions.contains(d) {
                errors.insert("_decision".into(), format!("`{d}` is not one of {}", spec.decisions.join(", ")));
            }
        }
        if !errors.is_empty() {
            return Err(EngineError::Validation(errors));
        }

        let action = match &self.ctx.token {
            TokenPosition::AtAction { action, .. } => action.clone(),
            TokenPosition::Completed => return Err(EngineError::InstanceGone(self.ctx.instance_id.clone())),
        };
        for (arg, attr, v) in parsed {
            let key = self.object_key(&action, &arg)?;
            self.set_field(&key, &attr, v);
        }
        if let (Some((arg, _)), Some(sel)) = (&spec.selection, &submission.selection) {
            let chosen = ref_value(sel);
            self.ctx.bindings.insert(bind_key(&action, arg), Value::SetOf(vec![chosen]));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_ids_round_trip() {
        assert_eq!(parse_action_id("ab23d-3"), Some(("ab23d", 3)));
        assert_eq!(parse_action_id("ab23d"), None);
        assert_eq!(parse_action_id("-3"), None);
        assert_eq!(parse_action_id("ab23d-x"), None);
    }

    #[test]
    fn numeric_scalars_compare_across_int_and_decimal() {
        assert_eq!(Scalar::Int(2), Scalar::Num(2.0));
        assert_ne!(Scalar::Int(2), Scalar::Str("2".into()));
        assert_ne!(Scalar::Null, Scalar::Bool(false));
    }
}
