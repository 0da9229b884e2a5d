//! Canonical text rendering. Output re-parses to a structurally equal tree.

use std::fmt::Write;

use super::ast::*;
use super::lexer::quote;
use super::parser::accessor_name;

const INDENT: &str = "    ";

pub fn pretty_class_model(model: &ClassModel) -> String {
    let mut out = format!("classdiagram {} {{\n", model.name);
    for (i, class) in model.classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let stereo = if class.is_user { " <<user>>" } else { "" };
        let _ = writeln!(out, "{INDENT}class {}{stereo} {{", class.name);
        for attr in &class.attributes {
            let _ = writeln!(out, "{INDENT}{INDENT}{}: {};", attr.name, attr.ty);
        }
        for assoc in &class.associations {
            let mult = match assoc.multiplicity {
                Multiplicity::One => "one",
                Multiplicity::Many => "many",
            };
            let _ = writeln!(out, "{INDENT}{INDENT}-> {}: {} {mult};", assoc.role, assoc.target);
        }
        let _ = writeln!(out, "{INDENT}}}");
    }
    out.push_str("}\n");
    out
}

pub fn pretty_activity(model: &ActivityModel) -> String {
    let mut out = format!("activity {} {{\n", model.name);
    for part in &model.partitions {
        let _ = writeln!(out, "{INDENT}role {} {{ {} }}", part.name, part.actions.join(", "));
    }
    for action in &model.actions {
        out.push('\n');
        pretty_action(&mut out, action);
    }
    if !model.edges.is_empty() {
        out.push('\n');
    }
    for edge in &model.edges {
        let _ = writeln!(out, "{INDENT}{}", pretty_edge(edge));
    }
    out.push_str("}\n");
    out
}

fn pretty_action(out: &mut String, action: &ActionDef) {
    let _ = writeln!(out, "{INDENT}action {} {{", action.name);
    for (kw, decls) in [("in", &action.in_pins), ("out", &action.out_pins), ("var", &action.vars)] {
        if decls.is_empty() {
            continue;
        }
        let list: Vec<String> = decls.iter().map(|d| format!("{} {}", d.ty, d.name)).collect();
        let _ = writeln!(out, "{INDENT}{INDENT}{kw} : {};", list.join(", "));
    }
    for stmt in &action.body {
        match &stmt.kind {
            StatementKind::Cmd(cmd) => {
                let _ = writeln!(out, "{INDENT}{INDENT}cmd : {};", pretty_command(cmd));
            }
            StatementKind::View { page, args } => {
                let _ = writeln!(out, "{INDENT}{INDENT}view : {page}({});", args.join(", "));
            }
            StatementKind::Script(stmts) => {
                let _ = writeln!(out, "{INDENT}{INDENT}java : {{");
                for s in stmts {
                    let _ = writeln!(out, "{INDENT}{INDENT}{INDENT}{}", pretty_script_stmt(s));
                }
                let _ = writeln!(out, "{INDENT}{INDENT}}}");
            }
        }
    }
    let _ = writeln!(out, "{INDENT}}}");
}

pub fn pretty_command(cmd: &Command) -> String {
    match cmd {
        Command::LoadAll { assign_to, class } => format!("{assign_to} = {class}.loadAll()"),
        Command::GetActualUser { assign_to } => format!("{assign_to} = getActualUser()"),
        Command::AssignRole { partition, user } => format!("assignRole({partition}, {user})"),
        Command::Save { target } => format!("save({target})"),
        Command::Notify { message } => format!("notify({})", quote(message)),
    }
}

pub fn pretty_script_stmt(stmt: &ScriptStmt) -> String {
    match &stmt.kind {
        ScriptKind::Assign { lhs, rhs } => format!("{lhs} = {};", pretty_expr(rhs)),
        ScriptKind::Invoke { receiver, attr, arg } => {
            format!("{receiver}.{}({});", accessor_name("set", attr), pretty_expr(arg))
        }
    }
}

pub fn pretty_expr(expr: &Expr) -> String {
    match expr {
        Expr::Var(v) => v.clone(),
        Expr::New(c) => format!("new {c}()"),
        Expr::Get { receiver, attr } => format!("{receiver}.{}()", accessor_name("get", attr)),
        Expr::FirstOf(v) => format!("{v}.iterator().next()"),
    }
}

fn pretty_node(node: &NodeRef) -> String {
    match node {
        NodeRef::Initial => "initial".into(),
        NodeRef::Final => "final".into(),
        NodeRef::Action { action, pin: Some(pin) } => format!("{action}.{pin}"),
        NodeRef::Action { action, pin: None } => action.clone(),
    }
}

pub fn pretty_edge(edge: &EdgeDef) -> String {
    let targets: Vec<String> = edge
        .targets
        .iter()
        .map(|t| match &t.guard {
            Some(g) => format!("[{}] {}", pretty_guard(g), pretty_node(&t.node)),
            None => pretty_node(&t.node),
        })
        .collect();
    format!("{} -> {};", pretty_node(&edge.source), targets.join(" | "))
}

pub fn pretty_guard(guard: &Guard) -> String {
    fn nested(g: &Guard) -> String {
        match g {
            Guard::And(_) | Guard::Or(_) => format!("({})", pretty_guard(g)),
            _ => pretty_guard(g),
        }
    }
    match guard {
        Guard::Literal(b) => b.to_string(),
        Guard::Compare { left, op, right } => {
            let op = match op {
                CompareOp::Eq => "==",
                CompareOp::Ne => "!=",
            };
            format!("{} {op} {}", pretty_operand(left), pretty_operand(right))
        }
        Guard::Not(inner) => match inner.as_ref() {
            Guard::Not(_) | Guard::Literal(_) => format!("!{}", pretty_guard(inner)),
            other => format!("!({})", pretty_guard(other)),
        },
        Guard::And(parts) => parts.iter().map(nested).collect::<Vec<_>>().join(" && "),
        Guard::Or(parts) => parts.iter().map(nested).collect::<Vec<_>>().join(" || "),
    }
}

fn pretty_operand(op: &Operand) -> String {
    match op {
        Operand::Var(v) => v.clone(),
        Operand::Get { receiver, attr } => format!("{receiver}.{}()", accessor_name("get", attr)),
        Operand::Literal(lit) => match lit {
            Literal::Str(s) => quote(s),
            Literal::Int(i) => i.to_string(),
            Literal::Decimal(d) => {
                let s = format!("{d:?}");
                if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
                    s
                } else {
                    format!("{s}.0")
                }
            }
            Literal::Bool(b) => b.to_string(),
            Literal::Null => "null".into(),
        },
    }
}

pub fn pretty_page(model: &PageModel) -> String {
    let params: Vec<String> = model.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    let mut out = format!("page {}({}) {{\n", model.name, params.join(", "));
    for el in &model.elements {
        let line = match &el.kind {
            ElementKind::Heading { level, text } => format!("heading {level} {}", quote(text)),
            ElementKind::Text(text) => format!("text {}", quote(text)),
            ElementKind::Output { param, attr: Some(a) } => format!("output {param}.{a}"),
            ElementKind::Output { param, attr: None } => format!("output {param}"),
            ElementKind::Input { param, attr } => format!("input {param}.{attr}"),
            ElementKind::Table {
                param,
                selectable,
                columns,
            } => {
                let sel = if *selectable { " selectable" } else { "" };
                format!("table {param}{sel} ({})", columns.join(", "))
            }
        };
        let _ = writeln!(out, "{INDENT}{line};");
    }
    out.push_str("}\n");
    out
}

pub fn pretty_entry(entry: &EntryRef) -> String {
    match entry {
        EntryRef::Page(p) => format!("page {p}"),
        EntryRef::Activity(a) => format!("activity {a}"),
        EntryRef::Class {
            class,
            mode: ClassPageMode::List,
        } => format!("list {class}"),
        EntryRef::Class {
            class,
            mode: ClassPageMode::Create,
        } => format!("create {class}"),
    }
}

pub fn pretty_app(model: &AppModel) -> String {
    let mut out = format!("app {} {{\n", model.name);
    if !model.roles.is_empty() {
        let _ = writeln!(out, "{INDENT}roles {};", model.roles.join(", "));
    }
    let block = |out: &mut String, header: String, entries: &[MenuEntry]| {
        let _ = writeln!(out, "{INDENT}{header} {{");
        for e in entries {
            let _ = writeln!(out, "{INDENT}{INDENT}{};", pretty_entry(&e.target));
        }
        let _ = writeln!(out, "{INDENT}}}");
    };
    block(&mut out, "menu".into(), &model.menu);
    for rule in &model.rights {
        block(&mut out, format!("rights {}", rule.role), &rule.allowed);
    }
    out.push_str("}\n");
    out
}
