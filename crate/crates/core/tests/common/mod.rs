#![allow(dead_code)]

use std::collections::BTreeMap;

use wisflow_core::engine::Engine;
use wisflow_core::fixture;
use wisflow_core::linker::LinkedSystem;
use wisflow_core::project::{load_sources, seed_store};
use wisflow_core::store::Store;

pub fn fixture_sources() -> Vec<(String, String)> {
    fixture::model_files()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s.to_string()))
        .collect()
}

pub fn fixture_system() -> LinkedSystem {
    load_sources("fixture", &fixture_sources()).expect("fixture links")
}

/// An engine over an in-memory store seeded with the two referees.
/// Returns the engine and the ids of `ref1` and `ref2`.
pub fn fixture_engine() -> (Engine, String, String) {
    let system = fixture_system();
    let store = Store::in_memory(system.class_model.clone());
    seed_store(&store, fixture::SEED).unwrap();
    let ref1 = store.authenticate("ref1", "ref1-secret").unwrap();
    let ref2 = store.authenticate("ref2", "ref2-secret").unwrap();
    (Engine::new(system, store), ref1, ref2)
}

pub fn form(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Links an ad-hoc project given as `(file name, source)` pairs.
pub fn system_from(files: &[(&str, &str)]) -> LinkedSystem {
    let files: Vec<(String, String)> = files.iter().map(|(n, s)| (n.to_string(), s.to_string())).collect();
    match load_sources("test", &files) {
        Ok(s) => s,
        Err(diags) => panic!("{}", diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")),
    }
}

/// A «user» class plus a plain class, and an app with no rights rules.
pub const SMALL_CLASSES: &str = "classdiagram Small {
    class Person <<user>> { login: String; password: String; }
    class Item { label: String; count: Int; }
}";

pub const SMALL_APP: &str = "app Small { roles member; menu { list Item; } }";

/// Engine over [`SMALL_CLASSES`] with the given activity and pages, and one
/// user `u` (password `p`). Returns the engine and the user id.
pub fn small_engine(activity: &str, pages: &[(&str, &str)]) -> (Engine, String) {
    let mut files = vec![("small.cd", SMALL_CLASSES), ("small.app", SMALL_APP), ("flow.act", activity)];
    files.extend_from_slice(pages);
    let system = system_from(&files);
    let store = Store::in_memory(system.class_model.clone());
    let user = store
        .create_object(
            "Person",
            BTreeMap::from([
                ("login".into(), wisflow_core::value::PrimValue::Str("u".into())),
                ("password".into(), wisflow_core::value::PrimValue::Str("p".into())),
            ]),
            BTreeMap::new(),
        )
        .unwrap()
        .id;
    (Engine::new(system, store), user)
}

pub mod http {
    use serde_json::{json, Value};
    use wisflow_core::httpapi::{Api, ApiRequest, ApiResponse};

    pub fn fixture_api() -> Api {
        let (engine, _, _) = super::fixture_engine();
        Api::new(engine)
    }

    pub fn login(api: &Api, login: &str, password: &str) -> String {
        let r = api.handle(&ApiRequest::new("POST", "/login").json(&json!({"login": login, "password": password})));
        assert_eq!(r.status, 200, "{}", r.body);
        r.body["token"].as_str().unwrap().to_string()
    }

    pub fn get(api: &Api, token: Option<&str>, path: &str) -> ApiResponse {
        call(api, "GET", token, path, None)
    }

    pub fn post(api: &Api, token: Option<&str>, path: &str, body: Value) -> ApiResponse {
        call(api, "POST", token, path, Some(body))
    }

    pub fn call(api: &Api, method: &str, token: Option<&str>, path: &str, body: Option<Value>) -> ApiResponse {
        let mut req = ApiRequest::new(method, path);
        if let Some(t) = token {
            req = req.bearer(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        api.handle(&req)
    }

    /// Every error body has the structured shape.
    pub fn assert_error_shape(r: &ApiResponse) {
        assert!(r.body["error"].is_string(), "{}", r.body);
        assert!(r.body["message"].is_string(), "{}", r.body);
        assert!(r.body["fields"].is_object(), "{}", r.body);
    }
}
