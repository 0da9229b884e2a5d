//! Round-trip properties: printing and re-parsing models, and persisting
//! execution contexts.

use proptest::prelude::*;

use wisflow_core::fixture;
use wisflow_core::store::Store;
use wisflow_core::syntax::ast::ClassModel;
use wisflow_core::syntax::{parse_by_extension, pretty_print, Model};
use wisflow_testkit::{contexts, models, rng_for};

fn reparse(file: &str, model: &Model) -> Model {
    let text = pretty_print(model);
    match parse_by_extension(file, &text) {
        Some(Ok(m)) => m,
        Some(Err(d)) => panic!("printed model does not parse: {d:?}\n{text}"),
        None => panic!("no parser for {file}"),
    }
}

fn assert_round_trip(file: &str, model: Model) {
    let again = reparse(file, &model);
    assert_eq!(again, model);
    assert_eq!(pretty_print(&again), pretty_print(&model), "printing is not a fixpoint");
}

#[test]
fn example_project_round_trips() {
    for (name, text) in fixture::model_files() {
        let model = parse_by_extension(name, text).unwrap().unwrap();
        assert_round_trip(name, model);
    }
}

fn generated(kind: u8, seed: u64) -> (&'static str, Model) {
    let rng = &mut rng_for("syntax", seed);
    match kind {
        0 => ("gen.cd", Model::Class(models::class_model(rng))),
        1 => ("gen.act", Model::Activity(models::activity(rng))),
        2 => ("gen.page", Model::Page(models::page(rng))),
        _ => ("gen.app", Model::App(models::app(rng))),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn generated_models_round_trip(kind in 0u8..4, seed in any::<u64>()) {
        let (file, model) = generated(kind, seed);
        let text = pretty_print(&model);
        let parsed = parse_by_extension(file, &text).unwrap();
        prop_assert!(parsed.is_ok(), "{:?}\n{}", parsed.err(), text);
        let parsed = parsed.unwrap();
        prop_assert_eq!(&parsed, &model);
        prop_assert_eq!(pretty_print(&parsed), text);
    }

    #[test]
    fn contexts_survive_json(seed in any::<u64>()) {
        let ctx = contexts::context(&mut rng_for("ctx-json", seed));
        let text = serde_json::to_string(&ctx).unwrap();
        let back: wisflow_core::store::ExecutionContext = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, ctx);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn contexts_survive_a_restart(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let rng = &mut rng_for("ctx-store", seed);
        let saved: Vec<_> = (0..3).map(|_| contexts::context(rng)).collect();
        {
            let store = Store::open(dir.path(), ClassModel { name: "E".into(), classes: vec![], file: "e.cd".into() }).unwrap();
            for ctx in &saved {
                store.save_context(ctx).unwrap();
            }
        }
        let store = Store::open(dir.path(), ClassModel { name: "E".into(), classes: vec![], file: "e.cd".into() }).unwrap();
        for ctx in &saved {
            prop_assert_eq!(&store.load_context(&ctx.instance_id).unwrap(), ctx);
        }
    }
}
