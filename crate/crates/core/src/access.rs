//! Role-based rights derived from the application model.
//!
//! A user's roles come from a `role` attribute on its «user» class when the
//! class declares one; a user class without it holds every declared role.
//! Requests without a session act as `guest`. An application model with no
//! `rights` blocks permits everything.

use std::collections::BTreeSet;

use crate::syntax::ast::{AppModel, ClassPageMode, EntryRef, MenuEntry};
use crate::value::{DomainObject, PrimValue};

pub const GUEST: &str = "guest";

pub fn roles_of(app: &AppModel, user: Option<&DomainObject>, user_class_has_role: bool) -> BTreeSet<String> {
    match user {
        None => BTreeSet::from([GUEST.to_string()]),
        Some(_) if !user_class_has_role => app.roles.iter().cloned().collect(),
        Some(obj) => match obj.fields.get("role") {
            Some(PrimValue::Str(role)) if app.roles.contains(role) => BTreeSet::from([role.clone()]),
            _ => BTreeSet::new(),
        },
    }
}

pub fn permits(app: &AppModel, roles: &BTreeSet<String>, entry: &EntryRef) -> bool {
    if app.rights.is_empty() {
        return true;
    }
    app.rights
        .iter()
        .filter(|rule| roles.contains(&rule.role))
        .any(|rule| rule.allowed.iter().any(|m| &m.target == entry))
}

/// CRUD operations on a class, as checked against `list`/`create` rights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrudOp {
    Read,
    Write,
}

/// Reading needs `list C` or `create C`; writing needs `create C`.
pub fn permits_crud(app: &AppModel, roles: &BTreeSet<String>, class: &str, op: CrudOp) -> bool {
    let entry = |mode| EntryRef::Class {
        class: class.to_string(),
        mode,
    };
    match op {
        CrudOp::Read => permits(app, roles, &entry(ClassPageMode::List)) || permits(app, roles, &entry(ClassPageMode::Create)),
        CrudOp::Write => permits(app, roles, &entry(ClassPageMode::Create)),
    }
}

/// The menu entries visible to a holder of `roles`, in declaration order.
pub fn menu_for<'a>(app: &'a AppModel, roles: &BTreeSet<String>) -> Vec<&'a MenuEntry> {
    app.menu.iter().filter(|m| permits(app, roles, &m.target)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::syntax::parse_app;

    fn app() -> AppModel {
        parse_app(fixture::APP_FILE, fixture::APP).unwrap()
    }

    fn user(role: &str) -> DomainObject {
        let mut u = DomainObject::new("Staff", "abcde");
        u.fields.insert("role".into(), PrimValue::Str(role.into()));
        u
    }

    #[test]
    fn anonymous_is_guest() {
        let app = app();
        let roles = roles_of(&app, None, true);
        assert_eq!(roles, BTreeSet::from(["guest".to_string()]));
        assert_eq!(menu_for(&app, &roles).len(), 1);
    }

    #[test]
    fn role_attribute_selects_rights() {
        let app = app();
        let student = roles_of(&app, Some(&user("student")), true);
        let lecturer = roles_of(&app, Some(&user("lecturer")), true);
        assert!(!permits(&app, &student, &EntryRef::Activity("GradeThesis".into())));
        assert!(permits(&app, &lecturer, &EntryRef::Activity("GradeThesis".into())));
        assert!(permits_crud(&app, &student, "ThesisData", CrudOp::Read));
        assert!(!permits_crud(&app, &student, "ThesisData", CrudOp::Write));
        assert!(permits_crud(&app, &lecturer, "Staff", CrudOp::Write));
        assert_eq!(menu_for(&app, &student).len(), 2);
        assert_eq!(menu_for(&app, &lecturer).len(), 5);
    }

    #[test]
    fn unknown_role_value_grants_nothing() {
        let app = app();
        let roles = roles_of(&app, Some(&user("dean")), true);
        assert!(roles.is_empty());
        assert!(menu_for(&app, &roles).is_empty());
    }

    #[test]
    fn no_rights_block_allows_everything() {
        let mut app = app();
        app.rights.clear();
        let roles = roles_of(&app, None, true);
        assert!(permits(&app, &roles, &EntryRef::Activity("GradeThesis".into())));
        assert!(permits_crud(&app, &roles, "Staff", CrudOp::Write));
    }

    #[test]
    fn user_class_without_role_attribute_holds_all_roles() {
        let app = app();
        let roles = roles_of(&app, Some(&DomainObject::new("Staff", "abcde")), false);
        assert_eq!(roles.len(), app.roles.len());
    }
}
