//! Cross-model resolution and well-formedness checking.
//!
//! Error codes:
//!
//! | code | rule |
//! |------|------|
//! | L001 | a type reference names an undeclared class |
//! | L002 | an attribute or association is used incorrectly (missing, or of an incompatible type) |
//! | L003 | a `view` statement does not match its page's parameter list |
//! | L004 | `assignRole`/`getActualUser` refer to an unknown partition or a non-«user» type |
//! | L005 | a menu or rights entry does not resolve |
//! | L006 | an edge connects incompatible pins |
//! | L007 | an in-pin of a reachable action has no incoming edge |
//! | L008 | a «user» class lacks `login: String` or `password: String` |
//! | L009 | an interactive action is not assigned to a partition |
//! | L010 | automatic actions form a cycle |
//! | L011 | a reachable action has no outgoing edge |
//! | L012 | a decision that no user can answer has an unguarded alternative |
//!
//! Warnings (`W001` unreachable action, `W002` unused variable) never block linking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::syntax::ast::*;
use crate::syntax::{Diagnostic, Location};

/// A fully resolved set of models.
#[derive(Debug, Clone, Serialize)]
pub struct LinkedSystem {
    pub class_model: ClassModel,
    pub activities: BTreeMap<String, ActivityModel>,
    pub pages: BTreeMap<String, PageModel>,
    pub app: AppModel,
    /// activity → action → partition name
    pub partitions: BTreeMap<String, BTreeMap<String, String>>,
    /// activity → action → page shown by its `view`
    pub views: BTreeMap<String, BTreeMap<String, String>>,
    pub warnings: Vec<Diagnostic>,
}

impl LinkedSystem {
    pub fn activity(&self, name: &str) -> Option<&ActivityModel> {
        self.activities.get(name)
    }

    pub fn page(&self, name: &str) -> Option<&PageModel> {
        self.pages.get(name)
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.class_model.class(name)
    }

    pub fn partition_of(&self, activity: &str, action: &str) -> Option<&str> {
        self.partitions.get(activity)?.get(action).map(String::as_str)
    }
}

pub fn link(
    class_model: ClassModel,
    activities: Vec<ActivityModel>,
    pages: Vec<PageModel>,
    app: AppModel,
) -> Result<LinkedSystem, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let classes: HashMap<&str, &ClassDef> = class_model.classes.iter().map(|c| (c.name.as_str(), c)).collect();

    let mut page_map: BTreeMap<String, PageModel> = BTreeMap::new();
    for page in pages {
        if page_map.contains_key(&page.name) {
            diags.push(Diagnostic::error(
                Location::new(&page.file, 1, 1),
                "duplicate-page",
                format!("page `{}` is defined in more than one file", page.name),
            ));
            continue;
        }
        page_map.insert(page.name.clone(), page);
    }
    let mut activity_map: BTreeMap<String, ActivityModel> = BTreeMap::new();
    for act in activities {
        if activity_map.contains_key(&act.name) {
            diags.push(Diagnostic::error(
                Location::new(&act.file, 1, 1),
                "duplicate-activity",
                format!("activity `{}` is defined in more than one file", act.name),
            ));
            continue;
        }
        activity_map.insert(act.name.clone(), act);
    }

    let cx = Ctx {
        classes: &classes,
        pages: &page_map,
    };

    check_user_classes(&class_model, &mut diags);
    for class in &class_model.classes {
        for assoc in &class.associations {
            if !classes.contains_key(assoc.target.as_str()) {
                diags.push(Diagnostic::error(
                    loc(&class_model.file, assoc.span),
                    "L001",
                    format!("association `{}.{}` targets undeclared class `{}`", class.name, assoc.role, assoc.target),
                ));
            }
        }
    }
    for page in page_map.values() {
        cx.check_page(page, &mut diags);
    }
    for act in activity_map.values() {
        cx.check_activity(act, &mut diags);
    }
    check_app(&app, &classes, &page_map, &activity_map, &mut diags);

    let mut partitions = BTreeMap::new();
    let mut views = BTreeMap::new();
    for act in activity_map.values() {
        let mut parts = BTreeMap::new();
        for p in &act.partitions {
            for a in &p.actions {
                parts.insert(a.clone(), p.name.clone());
            }
        }
        partitions.insert(act.name.clone(), parts);
        let mut v = BTreeMap::new();
        for a in &act.actions {
            for s in &a.body {
                if let StatementKind::View { page, .. } = &s.kind {
                    v.insert(a.name.clone(), page.clone());
                }
            }
        }
        views.insert(act.name.clone(), v);
    }

    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok(LinkedSystem {
        class_model,
        activities: activity_map,
        pages: page_map,
        app,
        partitions,
        views,
        warnings: diags,
    })
}

/// Actions reachable from `initial` by following edge targets.
pub fn reachable_actions(activity: &ActivityModel) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    if let Some(edge) = activity.initial_edge() {
        queue.extend(edge.targets.iter().filter_map(|t| t.node.action()));
    }
    while let Some(name) = queue.pop_front() {
        if !seen.insert(name.to_string()) {
            continue;
        }
        for edge in activity.edges.iter().filter(|e| e.source.action() == Some(name)) {
            queue.extend(edge.targets.iter().filter_map(|t| t.node.action()));
        }
    }
    seen
}

fn loc(file: &str, span: Span) -> Location {
    Location::new(file, span.line.max(1), span.column.max(1))
}

fn check_user_classes(model: &ClassModel, diags: &mut Vec<Diagnostic>) {
    for class in model.user_classes() {
        for required in ["login", "password"] {
            match class.attribute(required) {
                Some(a) if a.ty == BuiltinType::String => {}
                Some(a) => diags.push(Diagnostic::error(
                    loc(&model.file, a.span),
                    "L008",
                    format!("«user» class `{}` must declare `{required}: String`, found `{}`", class.name, a.ty),
                )),
                None => diags.push(Diagnostic::error(
                    loc(&model.file, class.span),
                    "L008",
                    format!("«user» class `{}` must declare `{required}: String`", class.name),
                )),
            }
        }
    }
}

fn check_app(
    app: &AppModel,
    classes: &HashMap<&str, &ClassDef>,
    pages: &BTreeMap<String, PageModel>,
    activities: &BTreeMap<String, ActivityModel>,
    diags: &mut Vec<Diagnostic>,
) {
    let entries = app.menu.iter().chain(app.rights.iter().flat_map(|r| &r.allowed));
    for entry in entries {
        let problem = match &entry.target {
            EntryRef::Page(p) => match pages.get(p) {
                None => Some(format!("menu entry refers to undeclared page `{p}`")),
                Some(page) if !page.params.is_empty() => {
                    Some(format!("page `{p}` takes parameters and cannot be a menu entry"))
                }
                Some(_) => None,
            },
            EntryRef::Activity(a) => {
                (!activities.contains_key(a)).then(|| format!("menu entry refers to undeclared activity `{a}`"))
            }
            EntryRef::Class { class, .. } => {
                (!classes.contains_key(class.as_str())).then(|| format!("menu entry refers to undeclared class `{class}`"))
            }
        };
        if let Some(message) = problem {
            diags.push(Diagnostic::error(loc(&app.file, entry.span), "L005", message));
        }
    }
}

struct Ctx<'a> {
    classes: &'a HashMap<&'a str, &'a ClassDef>,
    pages: &'a BTreeMap<String, PageModel>,
}

/// Type of an expression inside an action.
#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Known(TypeRef),
    /// Already reported; suppresses cascades.
    Error,
}

impl<'a> Ctx<'a> {
    fn check_type_ref(&self, file: &str, decl: &ParamDecl, diags: &mut Vec<Diagnostic>) {
        if let Some(class) = decl.ty.class_name() {
            if !self.classes.contains_key(class) {
                diags.push(Diagnostic::error(
                    loc(file, decl.span),
                    "L001",
                    format!("`{}` has type `{}`, but class `{class}` is not declared", decl.name, decl.ty),
                ));
            }
        }
    }

    fn class_of(&self, ty: &TypeRef) -> Option<&'a ClassDef> {
        match ty {
            TypeRef::Class(c) => self.classes.get(c.as_str()).copied(),
            _ => None,
        }
    }

    fn check_page(&self, page: &PageModel, diags: &mut Vec<Diagnostic>) {
        for p in &page.params {
            self.check_type_ref(&page.file, p, diags);
        }
        for el in &page.elements {
            let at = loc(&page.file, el.span);
            let param = |name: &str, diags: &mut Vec<Diagnostic>| -> Option<&ParamDecl> {
                let found = page.param(name);
                if found.is_none() {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L002",
                        format!("page `{}` has no parameter `{name}`", page.name),
                    ));
                }
                found
            };
            match &el.kind {
                ElementKind::Heading { .. } | ElementKind::Text(_) => {}
                ElementKind::Output { param: p, attr } => {
                    let Some(decl) = param(p, diags) else { continue };
                    if let Some(attr) = attr {
                        self.require_attribute(&at, &decl.ty, p, attr, diags);
                    }
                }
                ElementKind::Input { param: p, attr } => {
                    let Some(decl) = param(p, diags) else { continue };
                    self.require_attribute(&at, &decl.ty, p, attr, diags);
                }
                ElementKind::Table { param: p, columns, .. } => {
                    let Some(decl) = param(p, diags) else { continue };
                    match &decl.ty {
                        TypeRef::SetOf(c) => {
                            if let Some(class) = self.classes.get(c.as_str()) {
                                for col in columns {
                                    if class.attribute(col).is_none() {
                                        diags.push(Diagnostic::error(
                                            at.clone(),
                                            "L002",
                                            format!("class `{c}` has no attribute `{col}` for a table column"),
                                        ));
                                    }
                                }
                            }
                        }
                        other => diags.push(Diagnostic::error(
                            at.clone(),
                            "L002",
                            format!("table `{p}` needs a `Set<...>` parameter, found `{other}`"),
                        )),
                    }
                }
            }
        }
    }

    /// `param.attr` must name a builtin-typed attribute of the parameter's class.
    fn require_attribute(&self, at: &Location, ty: &TypeRef, param: &str, attr: &str, diags: &mut Vec<Diagnostic>) {
        match ty {
            TypeRef::Class(c) => {
                let Some(class) = self.classes.get(c.as_str()) else { return };
                if class.attribute(attr).is_none() {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L002",
                        format!("class `{c}` has no attribute `{attr}`"),
                    ));
                }
            }
            other => diags.push(Diagnostic::error(
                at.clone(),
                "L002",
                format!("`{param}` has type `{other}`, which has no attribute `{attr}`"),
            )),
        }
    }

    fn check_activity(&self, act: &ActivityModel, diags: &mut Vec<Diagnostic>) {
        let file = act.file.as_str();
        for action in &act.actions {
            for decl in action.in_pins.iter().chain(&action.out_pins).chain(&action.vars) {
                self.check_type_ref(file, decl, diags);
            }
            self.check_body(act, action, diags);
            check_unused_vars(file, action, diags);
        }

        let reachable = reachable_actions(act);
        for action in &act.actions {
            if !reachable.contains(&action.name) {
                diags.push(Diagnostic::warning(
                    loc(file, action.span),
                    "W001",
                    format!("action `{}` is not reachable from `initial`", action.name),
                ));
            }
            if action.is_interactive() && act.partition_of(&action.name).is_none() {
                diags.push(Diagnostic::error(
                    loc(file, action.span),
                    "L009",
                    format!("interactive action `{}` is not assigned to any partition", action.name),
                ));
            }
        }

        self.check_edges(act, &reachable, diags);
        check_automatic_cycles(act, diags);
    }

    fn check_body(&self, act: &ActivityModel, action: &ActionDef, diags: &mut Vec<Diagnostic>) {
        let file = act.file.as_str();
        let type_of_name = |name: &str| action.declared(name).map(|d| d.ty.clone());
        for stmt in &action.body {
            let at = loc(file, stmt.span);
            match &stmt.kind {
                StatementKind::Cmd(cmd) => match cmd {
                    Command::LoadAll { assign_to, class } => {
                        if !self.classes.contains_key(class.as_str()) {
                            diags.push(Diagnostic::error(
                                at,
                                "L001",
                                format!("`{class}.loadAll()` refers to undeclared class `{class}`"),
                            ));
                        } else if type_of_name(assign_to) != Some(TypeRef::SetOf(class.clone())) {
                            diags.push(Diagnostic::error(
                                at,
                                "L002",
                                format!("`{assign_to}` must have type `Set<{class}>` to hold `{class}.loadAll()`"),
                            ));
                        }
                    }
                    Command::GetActualUser { assign_to } => {
                        if let Some(ty) = type_of_name(assign_to) {
                            if !self.is_user_type(&ty) {
                                diags.push(Diagnostic::error(
                                    at,
                                    "L004",
                                    format!("`{assign_to}` has type `{ty}`, which is not a «user» class"),
                                ));
                            }
                        }
                    }
                    Command::AssignRole { partition, user } => {
                        if act.partition(partition).is_none() {
                            diags.push(Diagnostic::error(
                                at,
                                "L004",
                                format!("activity `{}` has no partition `{partition}`", act.name),
                            ));
                        } else if let Some(ty) = type_of_name(user) {
                            if !self.is_user_type(&ty) {
                                diags.push(Diagnostic::error(
                                    at,
                                    "L004",
                                    format!("`{user}` has type `{ty}`, which is not a «user» class"),
                                ));
                            }
                        }
                    }
                    Command::Save { target } => {
                        if let Some(ty) = type_of_name(target) {
                            if !matches!(ty, TypeRef::Class(ref c) if self.classes.contains_key(c.as_str())) {
                                diags.push(Diagnostic::error(
                                    at,
                                    "L002",
                                    format!("`save` needs a domain object, `{target}` has type `{ty}`"),
                                ));
                            }
                        }
                    }
                    Command::Notify { .. } => {}
                },
                StatementKind::View { page, args } => self.check_view(&at, action, page, args, diags),
                StatementKind::Script(stmts) => {
                    for s in stmts {
                        let at = if s.span.line == 0 { at.clone() } else { loc(file, s.span) };
                        self.check_script_stmt(&at, action, s, diags);
                    }
                }
            }
        }
    }

    fn is_user_type(&self, ty: &TypeRef) -> bool {
        self.class_of(ty).is_some_and(|c| c.is_user)
    }

    fn check_view(&self, at: &Location, action: &ActionDef, page: &str, args: &[String], diags: &mut Vec<Diagnostic>) {
        let Some(page_def) = self.pages.get(page) else {
            diags.push(Diagnostic::error(at.clone(), "L003", format!("view refers to undeclared page `{page}`")));
            return;
        };
        if page_def.params.len() != args.len() {
            diags.push(Diagnostic::error(
                at.clone(),
                "L003",
                format!(
                    "page `{page}` takes {} parameter(s), but the view passes {}",
                    page_def.params.len(),
                    args.len()
                ),
            ));
            return;
        }
        for (arg, param) in args.iter().zip(&page_def.params) {
            if let Some(decl) = action.declared(arg) {
                if decl.ty != param.ty {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L003",
                        format!(
                            "`{arg}` has type `{}`, but page `{page}` expects `{}` for `{}`",
                            decl.ty, param.ty, param.name
                        ),
                    ));
                }
            }
        }
    }

    fn expr_type(&self, at: &Location, action: &ActionDef, expr: &Expr, diags: &mut Vec<Diagnostic>) -> Ty {
        match expr {
            Expr::Var(n) => action.declared(n).map(|d| Ty::Known(d.ty.clone())).unwrap_or(Ty::Error),
            Expr::New(c) => {
                if self.classes.contains_key(c.as_str()) {
                    Ty::Known(TypeRef::Class(c.clone()))
                } else {
                    diags.push(Diagnostic::error(at.clone(), "L001", format!("`new {c}()` refers to undeclared class `{c}`")));
                    Ty::Error
                }
            }
            Expr::FirstOf(n) => match action.declared(n).map(|d| &d.ty) {
                Some(TypeRef::SetOf(c)) => Ty::Known(TypeRef::Class(c.clone())),
                Some(other) => {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L002",
                        format!("`{n}.iterator()` needs a set, `{n}` has type `{other}`"),
                    ));
                    Ty::Error
                }
                None => Ty::Error,
            },
            Expr::Get { receiver, attr } => match self.member_type(at, action, receiver, attr, diags) {
                Some(t) => Ty::Known(t),
                None => Ty::Error,
            },
        }
    }

    /// Type of `receiver.attr` (attribute or association).
    fn member_type(
        &self,
        at: &Location,
        action: &ActionDef,
        receiver: &str,
        attr: &str,
        diags: &mut Vec<Diagnostic>,
    ) -> Option<TypeRef> {
        let decl = action.declared(receiver)?;
        let class = match &decl.ty {
            TypeRef::Class(c) => *self.classes.get(c.as_str())?,
            other => {
                diags.push(Diagnostic::error(
                    at.clone(),
                    "L002",
                    format!("`{receiver}` has type `{other}`, which has no member `{attr}`"),
                ));
                return None;
            }
        };
        if let Some(a) = class.attribute(attr) {
            return Some(TypeRef::Builtin(a.ty));
        }
        if let Some(assoc) = class.association(attr) {
            return Some(match assoc.multiplicity {
                Multiplicity::One => TypeRef::Class(assoc.target.clone()),
                Multiplicity::Many => TypeRef::SetOf(assoc.target.clone()),
            });
        }
        diags.push(Diagnostic::error(
            at.clone(),
            "L002",
            format!("class `{}` has no attribute or association `{attr}`", class.name),
        ));
        None
    }

    fn check_script_stmt(&self, at: &Location, action: &ActionDef, stmt: &ScriptStmt, diags: &mut Vec<Diagnostic>) {
        match &stmt.kind {
            ScriptKind::Assign { lhs, rhs } => {
                let rhs_ty = self.expr_type(at, action, rhs, diags);
                if let (Some(decl), Ty::Known(t)) = (action.declared(lhs), rhs_ty) {
                    if decl.ty != t {
                        diags.push(Diagnostic::error(
                            at.clone(),
                            "L002",
                            format!("cannot assign a `{t}` to `{lhs}` of type `{}`", decl.ty),
                        ));
                    }
                }
            }
            ScriptKind::Invoke { receiver, attr, arg } => {
                let member = self.member_type(at, action, receiver, attr, diags);
                let arg_ty = self.expr_type(at, action, arg, diags);
                if let (Some(m), Ty::Known(a)) = (member, arg_ty) {
                    let ok = match (&m, &a) {
                        (TypeRef::SetOf(t), TypeRef::Class(c)) => t == c,
                        _ => m == a,
                    };
                    if !ok {
                        diags.push(Diagnostic::error(
                            at.clone(),
                            "L002",
                            format!("`{receiver}.{attr}` has type `{m}` and cannot take a `{a}`"),
                        ));
                    }
                }
            }
        }
    }

    fn check_edges(&self, act: &ActivityModel, reachable: &BTreeSet<String>, diags: &mut Vec<Diagnostic>) {
        let file = act.file.as_str();
        let mut fed: HashSet<(&str, &str)> = HashSet::new();
        for edge in &act.edges {
            let at = loc(file, edge.span);
            let source_ty: Option<&TypeRef> = match &edge.source {
                NodeRef::Action { action, pin: Some(pin) } => {
                    match act.action(action).and_then(|a| a.out_pin(pin)) {
                        Some(decl) => Some(&decl.ty),
                        None => {
                            diags.push(Diagnostic::error(
                                at.clone(),
                                "L006",
                                format!("action `{action}` has no out-pin `{pin}`"),
                            ));
                            continue;
                        }
                    }
                }
                _ => None,
            };
            for target in &edge.targets {
                let NodeRef::Action { action, pin: Some(pin) } = &target.node else { continue };
                let Some(decl) = act.action(action).and_then(|a| a.in_pin(pin)) else {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L006",
                        format!("action `{action}` has no in-pin `{pin}`"),
                    ));
                    continue;
                };
                fed.insert((action.as_str(), pin.as_str()));
                match source_ty {
                    Some(t) if *t != decl.ty => diags.push(Diagnostic::error(
                        at.clone(),
                        "L006",
                        format!(
                            "edge passes `{t}` from {} into `{action}.{pin}` of type `{}`",
                            describe_node(&edge.source),
                            decl.ty
                        ),
                    )),
                    Some(_) => {}
                    None => diags.push(Diagnostic::error(
                        at.clone(),
                        "L006",
                        format!(
                            "edge from {} carries no value but targets in-pin `{action}.{pin}`",
                            describe_node(&edge.source)
                        ),
                    )),
                }
            }
            if let Some(src) = edge.source.action().or(matches!(edge.source, NodeRef::Initial).then_some("initial")) {
                let answerable = src != "initial" && act.action(src).is_some_and(ActionDef::is_interactive);
                if edge.is_decision() && !answerable && edge.targets.iter().any(|t| t.guard.is_none()) {
                    diags.push(Diagnostic::error(
                        at.clone(),
                        "L012",
                        format!(
                            "decision after {} has unguarded alternatives, but no user is asked to choose there",
                            if src == "initial" { "`initial`".to_string() } else { format!("automatic action `{src}`") }
                        ),
                    ));
                }
            }
        }
        for action in &act.actions {
            if !reachable.contains(&action.name) {
                continue;
            }
            for pin in &action.in_pins {
                if !fed.contains(&(action.name.as_str(), pin.name.as_str())) {
                    diags.push(Diagnostic::error(
                        loc(file, pin.span),
                        "L007",
                        format!("in-pin `{}.{}` has no incoming edge", action.name, pin.name),
                    ));
                }
            }
            if act.outgoing(&action.name).is_none() {
                diags.push(Diagnostic::error(
                    loc(file, action.span),
                    "L011",
                    format!("action `{}` has no outgoing edge; connect it to another action or `final`", action.name),
                ));
            }
        }
    }
}

fn describe_node(node: &NodeRef) -> String {
    match node {
        NodeRef::Initial => "`initial`".into(),
        NodeRef::Final => "`final`".into(),
        NodeRef::Action { action, pin: Some(p) } => format!("`{action}.{p}`"),
        NodeRef::Action { action, pin: None } => format!("`{action}`"),
    }
}

fn check_unused_vars(file: &str, action: &ActionDef, diags: &mut Vec<Diagnostic>) {
    let mut used: HashSet<&str> = HashSet::new();
    for stmt in &action.body {
        match &stmt.kind {
            StatementKind::Cmd(cmd) => match cmd {
                Command::LoadAll { assign_to, .. } | Command::GetActualUser { assign_to } => {
                    used.insert(assign_to);
                }
                Command::AssignRole { user, .. } => {
                    used.insert(user);
                }
                Command::Save { target } => {
                    used.insert(target);
                }
                Command::Notify { .. } => {}
            },
            StatementKind::View { args, .. } => used.extend(args.iter().map(String::as_str)),
            StatementKind::Script(stmts) => {
                for s in stmts {
                    let (name, expr) = match &s.kind {
                        ScriptKind::Assign { lhs, rhs } => (lhs, rhs),
                        ScriptKind::Invoke { receiver, arg, .. } => (receiver, arg),
                    };
                    used.insert(name);
                    match expr {
                        Expr::Var(n) | Expr::FirstOf(n) | Expr::Get { receiver: n, .. } => {
                            used.insert(n);
                        }
                        Expr::New(_) => {}
                    }
                }
            }
        }
    }
    for var in &action.vars {
        if !used.contains(var.name.as_str()) {
            diags.push(Diagnostic::warning(
                loc(file, var.span),
                "W002",
                format!("variable `{}` of action `{}` is never used", var.name, action.name),
            ));
        }
    }
}

/// Automatic actions chained to automatic actions must not loop: a token
/// entering such a loop would never reach a page or `final`.
fn check_automatic_cycles(act: &ActivityModel, diags: &mut Vec<Diagnostic>) {
    let automatic: HashSet<&str> = act
        .actions
        .iter()
        .filter(|a| !a.is_interactive())
        .map(|a| a.name.as_str())
        .collect();
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for edge in &act.edges {
        let Some(src) = edge.source.action() else { continue };
        if !automatic.contains(src) {
            continue;
        }
        for t in &edge.targets {
            if let Some(dst) = t.node.action() {
                if automatic.contains(dst) {
                    succ.entry(src).or_default().push(dst);
                }
            }
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    let mut reported = false;
    for a in &act.actions {
        let start = a.name.as_str();
        if !automatic.contains(start) || state.get(start).copied().unwrap_or(0) != 0 || reported {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        state.insert(start, 1);
        while let Some((node, idx)) = stack.pop() {
            let next = succ.get(node).and_then(|v| v.get(idx)).copied();
            match next {
                Some(n) => {
                    stack.push((node, idx + 1));
                    match state.get(n).copied().unwrap_or(0) {
                        0 => {
                            state.insert(n, 1);
                            stack.push((n, 0));
                        }
                        1 => {
                            let span = act.action(n).map(|a| a.span).unwrap_or_default();
                            diags.push(Diagnostic::error(
                                loc(&act.file, span),
                                "L010",
                                format!("automatic actions form a cycle through `{n}`"),
                            ));
                            reported = true;
                            break;
                        }
                        _ => {}
                    }
                }
                None => {
                    state.insert(node, 2);
                }
            }
        }
    }
}
