mod common;

use std::collections::BTreeMap;

use common::{fixture_engine, form, small_engine};
use wisflow_core::engine::{ChoiceScript, ChoiceStep, EngineError, NextStep, RenderedElement, Submission};
use wisflow_core::store::{Phase, TokenPosition};
use wisflow_core::value::{PrimValue, Value};

fn interactive(next: &NextStep) -> (&str, &str) {
    match next {
        NextStep::Interactive { instance_id, action, .. } => (instance_id, action),
        other => panic!("expected an interactive step, got {other:?}"),
    }
}

fn table_rows(render: &wisflow_core::engine::PageRender) -> Vec<String> {
    render
        .elements
        .iter()
        .find_map(|e| match e {
            RenderedElement::Table { rows, .. } => Some(rows.iter().map(|r| r.id.clone()).collect()),
            _ => None,
        })
        .expect("page has a table")
}

#[test]
fn start_binds_starter_to_first_partition() {
    let (engine, ref1, _) = fixture_engine();
    let (ctx, next) = engine.start_activity("GradeThesis", &ref1).unwrap();
    assert_eq!(interactive(&next).1, "AssignRef2");
    assert_eq!(ctx.role_bindings, BTreeMap::from([("Referee1".to_string(), ref1.clone())]));
    let stored = engine.store().load_context(&ctx.instance_id).unwrap();
    assert_eq!(
        stored.token,
        TokenPosition::AtAction {
            action: "AssignRef2".into(),
            phase: Phase::BeforeView
        }
    );
}

#[test]
fn two_starts_are_independent() {
    let (engine, ref1, _) = fixture_engine();
    let (a, _) = engine.start_activity("GradeThesis", &ref1).unwrap();
    let (b, _) = engine.start_activity("GradeThesis", &ref1).unwrap();
    assert_ne!(a.instance_id, b.instance_id);
    let tasks = engine.list_tasks(&ref1);
    assert_eq!(tasks.len(), 2);
    assert_eq!(tasks[0].instance_id, a.instance_id);
    assert_eq!(tasks[1].instance_id, b.instance_id);
}

#[test]
fn unknown_activity_and_missing_right() {
    let (engine, _, _) = fixture_engine();
    let student = engine
        .store()
        .create_object(
            "Staff",
            BTreeMap::from([
                ("login".into(), PrimValue::Str("stu".into())),
                ("password".into(), PrimValue::Str("pw".into())),
                ("role".into(), PrimValue::Str("student".into())),
            ]),
            BTreeMap::new(),
        )
        .unwrap();
    assert!(matches!(engine.start_activity("Nope", &student.id), Err(EngineError::UnknownActivity(_))));
    assert!(matches!(
        engine.start_activity("GradeThesis", &student.id),
        Err(EngineError::PermissionDenied(_))
    ));
    assert!(engine.store().list_contexts().is_empty());
}

#[test]
fn grade_thesis_step_by_step() {
    let (engine, ref1, ref2) = fixture_engine();
    let (ctx, _) = engine.start_activity("GradeThesis", &ref1).unwrap();
    let id = ctx.instance_id.clone();

    // AssignRef2: loadAll and getActualUser have run before the page shows
    let render = engine.render_action(&id, &ref1).unwrap();
    assert_eq!(render.page, "SelectSecondaryRef");
    assert_eq!(table_rows(&render), vec![ref1.clone(), ref2.clone()]);
    assert!(render.decisions.is_empty());
    let after_first = engine.store().load_context(&id).unwrap();
    // refreshing does not re-run the pre-view statements
    assert_eq!(engine.render_action(&id, &ref1).unwrap(), render);
    assert_eq!(engine.store().load_context(&id).unwrap(), after_first);

    let next = engine
        .submit_action(&id, &ref1, &Submission { selection: Some(ref2.clone()), ..Submission::default() })
        .unwrap();
    assert_eq!(interactive(&next).1, "SetGrade1");
    let ctx = engine.store().load_context(&id).unwrap();
    assert_eq!(ctx.role_bindings["Referee2"], ref2);
    assert_eq!(ctx.transient_objects.len(), 1);
    let thesis = ctx.transient_objects.values().next().unwrap();
    assert_eq!(thesis.links["primaryRef"], vec![ref1.clone()]);
    assert_eq!(thesis.links["secondaryRef"], vec![ref2.clone()]);
    assert!(engine.store().load_all("ThesisData").unwrap().is_empty());

    // SetGrade1 belongs to Referee1
    assert!(matches!(engine.render_action(&id, &ref2), Err(EngineError::WrongUser { .. })));
    assert_eq!(engine.store().load_context(&id).unwrap(), ctx);
    engine.render_action(&id, &ref1).unwrap();
    let next = engine
        .submit_action(&id, &ref1, &Submission { form: form(&[("thesis.grade1", "1.3")]), ..Submission::default() })
        .unwrap();
    assert_eq!(interactive(&next).1, "SetGrade2");
    assert!(engine.list_tasks(&ref1).is_empty());
    let tasks = engine.list_tasks(&ref2);
    assert_eq!(tasks.len(), 1);
    assert_eq!((tasks[0].activity.as_str(), tasks[0].action.as_str()), ("GradeThesis", "SetGrade2"));

    // SetGrade2 shows grade1 read-only and grade2 as the one editable field
    assert!(matches!(engine.render_action(&id, &ref1), Err(EngineError::WrongUser { .. })));
    let render = engine.render_action(&id, &ref2).unwrap();
    let editable: Vec<_> = render.elements.iter().filter(|e| e.is_editable()).collect();
    assert_eq!(editable.len(), 1);
    assert_eq!(render.fields, BTreeMap::from([("thesis.grade2".to_string(), "Decimal".to_string())]));
    assert_eq!(render.decisions, vec!["SaveAndNotify".to_string(), "Save".to_string()]);

    let before = engine.store().load_context(&id).unwrap();
    let bad = Submission {
        form: form(&[("thesis.grade2", "abc")]),
        decision: Some("SaveAndNotify".into()),
        ..Submission::default()
    };
    match engine.submit_action(&id, &ref2, &bad) {
        Err(EngineError::Validation(fields)) => assert!(fields.contains_key("thesis.grade2")),
        other => panic!("{other:?}"),
    }
    assert_eq!(engine.store().load_context(&id).unwrap(), before);

    let good = Submission {
        form: form(&[("thesis.grade2", "2.0")]),
        decision: Some("SaveAndNotify".into()),
        ..Submission::default()
    };
    let next = engine.submit_action(&id, &ref2, &good).unwrap();
    assert_eq!(interactive(&next).1, "Saved");
    let saved = engine.store().load_all("ThesisData").unwrap();
    assert_eq!(saved.len(), 1);
    assert_eq!(saved[0].fields["grade1"], PrimValue::Decimal(1.3));
    assert_eq!(saved[0].fields["grade2"], PrimValue::Decimal(2.0));
    assert_eq!(engine.store().inbox(&ref1).len(), 1);
    assert_eq!(engine.store().inbox(&ref2).len(), 1);
    let ctx = engine.store().load_context(&id).unwrap();
    assert!(ctx.transient_objects.is_empty());
    assert_eq!(ctx.bindings["Saved.i"], Value::Ref(saved[0].id.clone()));

    engine.render_action(&id, &ref2).unwrap();
    let next = engine.submit_action(&id, &ref2, &Submission::default()).unwrap();
    assert_eq!(next, NextStep::Finished { instance_id: id.clone() });
    assert!(engine.store().load_context(&id).is_err());
    assert!(matches!(engine.render_action(&id, &ref2), Err(EngineError::InstanceGone(_))));
    assert!(engine.list_tasks(&ref2).is_empty());
}

#[test]
fn stale_action_id_is_gone() {
    let (engine, ref1, ref2) = fixture_engine();
    let (_, next) = engine.start_activity("GradeThesis", &ref1).unwrap();
    let NextStep::Interactive { action_id, .. } = next else { panic!() };
    engine.render_by_action_id(&action_id, &ref1).unwrap();
    engine
        .submit_by_action_id(&action_id, &ref1, &Submission { selection: Some(ref2), ..Submission::default() })
        .unwrap();
    assert!(matches!(engine.render_by_action_id(&action_id, &ref1), Err(EngineError::InstanceGone(_))));
    assert!(matches!(engine.render_by_action_id("zzzzz-1", &ref1), Err(EngineError::InstanceNotFound(_))));
}

fn grading_script(ref1: &str, decision: &str) -> ChoiceScript {
    ChoiceScript {
        starter: ref1.to_string(),
        steps: vec![
            ChoiceStep::default(),
            ChoiceStep { form: form(&[("thesis.grade1", "1.0")]), ..ChoiceStep::default() },
            ChoiceStep {
                form: form(&[("thesis.grade2", "1.7")]),
                decision: Some(decision.into()),
                ..ChoiceStep::default()
            },
            ChoiceStep::default(),
        ],
    }
}

#[test]
fn simulate_save_path() {
    let (engine, ref1, _) = fixture_engine();
    let sim = engine.simulate("GradeThesis", &grading_script(&ref1, "Save")).unwrap();
    assert_eq!(sim.trace, ["AssignRef2", "SetGrade1", "SetGrade2", "Save", "Saved"]);
    assert!(sim.notifications.is_empty());
    assert_eq!(engine.store().load_all("ThesisData").unwrap().len(), 1);
}

#[test]
fn simulate_notify_path() {
    let (engine, ref1, ref2) = fixture_engine();
    let mut script = grading_script(&ref1, "SaveAndNotify");
    script.steps[0].selection = Some(ref2.clone());
    let sim = engine.simulate("GradeThesis", &script).unwrap();
    assert_eq!(sim.trace, ["AssignRef2", "SetGrade1", "SetGrade2", "SaveAndNotify", "Saved"]);
    assert_eq!(sim.notifications.len(), 2);
    assert_eq!(engine.store().inbox(&ref1).len(), 1);
    assert_eq!(engine.store().inbox(&ref2).len(), 1);
}

#[test]
fn notify_reaches_each_participant_once() {
    // the default selection is the first staff row, so ref1 holds both roles
    let (engine, ref1, ref2) = fixture_engine();
    let sim = engine.simulate("GradeThesis", &grading_script(&ref1, "SaveAndNotify")).unwrap();
    assert_eq!(sim.notifications.len(), 1);
    assert_eq!(engine.store().inbox(&ref1).len(), 1);
    assert!(engine.store().inbox(&ref2).is_empty());
}

#[test]
fn script_exhaustion_is_reported() {
    let (engine, ref1, _) = fixture_engine();
    let script = ChoiceScript { starter: ref1, steps: vec![ChoiceStep::default()] };
    assert!(matches!(engine.simulate("GradeThesis", &script), Err(EngineError::ScriptExhausted(1))));
}

#[test]
fn missing_decision_is_refused() {
    let (engine, ref1, _) = fixture_engine();
    let mut script = grading_script(&ref1, "Save");
    script.steps[2].decision = None;
    match engine.simulate("GradeThesis", &script) {
        Err(EngineError::MissingDecision(options)) => assert_eq!(options, ["SaveAndNotify", "Save"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_decision_is_a_validation_error() {
    let (engine, ref1, _) = fixture_engine();
    let mut script = grading_script(&ref1, "Discard");
    script.steps[2].decision = Some("Discard".into());
    assert!(matches!(engine.simulate("GradeThesis", &script), Err(EngineError::Validation(_))));
}

const PAGE_EMPTY: (&str, &str) = ("P.page", "page P() { text \"go\"; }");

#[test]
fn first_of_empty_collection_fails_without_side_effects() {
    let act = "activity Flow {
        role member { A }
        action A {
            var : Set<Item> items, Item first;
            cmd : items = Item.loadAll();
            view : P();
            java : { first = items.iterator().next(); }
        }
        initial -> A;
        A -> final;
    }";
    let (engine, user) = small_engine(act, &[PAGE_EMPTY]);
    let (ctx, _) = engine.start_activity("Flow", &user).unwrap();
    engine.render_action(&ctx.instance_id, &user).unwrap();
    let before = engine.store().load_context(&ctx.instance_id).unwrap();
    assert!(matches!(
        engine.submit_action(&ctx.instance_id, &user, &Submission::default()),
        Err(EngineError::EmptyCollection(_))
    ));
    assert_eq!(engine.store().load_context(&ctx.instance_id).unwrap(), before);
}

#[test]
fn true_guard_wins_over_choice() {
    let act = "activity Flow {
        role member { A, B, C }
        action A { view : P(); }
        action B { view : P(); }
        action C { view : P(); }
        initial -> A;
        A -> [true] B | C;
        B -> final;
        C -> final;
    }";
    let (engine, user) = small_engine(act, &[PAGE_EMPTY]);
    let script = ChoiceScript {
        starter: user.clone(),
        steps: vec![
            ChoiceStep { decision: Some("C".into()), ..ChoiceStep::default() },
            ChoiceStep::default(),
        ],
    };
    let sim = engine.simulate("Flow", &script).unwrap();
    assert_eq!(sim.trace, ["A", "B"]);
}

#[test]
fn automatic_actions_chain_and_persist() {
    let act = "activity Flow {
        role member { Show }
        action Make {
            out : Item o;
            java : { o = new Item(); }
        }
        action Keep {
            in : Item i;
            out : Item o;
            cmd : save(i);
            java : { o = i; }
        }
        action Show {
            in : Item i;
            view : Q(i);
        }
        initial -> Make;
        Make.o -> Keep.i;
        Keep.o -> Show.i;
        Show -> final;
    }";
    let page = ("Q.page", "page Q(Item item) { input item.label; input item.count; }");
    let (engine, user) = small_engine(act, &[page]);
    let (ctx, next) = engine.start_activity("Flow", &user).unwrap();
    assert_eq!(interactive(&next).1, "Show");
    let items = engine.store().load_all("Item").unwrap();
    assert_eq!(items.len(), 1);
    let render = engine.render_action(&ctx.instance_id, &user).unwrap();
    assert_eq!(render.fields.len(), 2);
    let bad = Submission { form: form(&[("item.label", "x"), ("item.count", "1.5")]), ..Submission::default() };
    assert!(matches!(engine.submit_action(&ctx.instance_id, &user, &bad), Err(EngineError::Validation(_))));
    let good = Submission { form: form(&[("item.label", "x"), ("item.count", "7")]), ..Submission::default() };
    engine.submit_action(&ctx.instance_id, &user, &good).unwrap();
    let item = engine.store().load("Item", &items[0].id).unwrap();
    assert_eq!(item.fields["count"], PrimValue::Int(7));
    assert_eq!(item.fields["label"], PrimValue::Str("x".into()));
}
