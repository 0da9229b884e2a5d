mod common;

use std::collections::BTreeMap;
use std::fs;
use std::net::TcpListener;
use std::path::Path;

use serde_json::json;

use common::{path_arg, run, Server, Session};
use wisflow_testkit::mutations::MUTATIONS;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn init_project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["init", path_arg(&dir.path().join("p"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn check_accepts_the_example_silently() {
    let tmp = init_project();
    let out = run(&["check", path_arg(&tmp.path().join("p"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stderr(&out), "");
}

#[test]
fn check_reports_a_broken_view_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let m = MUTATIONS.iter().find(|m| m.code == "L003").unwrap();
    for (name, text) in m.files() {
        fs::write(tmp.path().join(name), text).unwrap();
    }
    let out = run(&["check", path_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("GradeThesis.act:"), "{err}");
    assert!(lines[0].contains("error[L003]"), "{err}");
}

#[test]
fn check_of_an_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["check", path_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no application model found"));
}

#[test]
fn check_of_a_missing_directory_is_an_environment_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["check", path_arg(&tmp.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_leaves_the_directory_alone() {
    let tmp = init_project();
    let dir = tmp.path().join("p");
    let before = snapshot(&dir);
    run(&["check", path_arg(&dir)]);
    assert_eq!(snapshot(&dir), before);
    assert!(!dir.join("data").exists());
}

#[test]
fn init_refuses_a_non_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let out = run(&["init", path_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(snapshot(tmp.path()).len(), 1);
}

#[test]
fn init_writes_models_and_seed() {
    let tmp = init_project();
    let files = snapshot(&tmp.path().join("p"));
    for name in ["theses.cd", "GradeThesis.act", "theses.app", "seed.json", "SetGrade2Page.page"] {
        assert!(files.contains_key(name), "{name} missing");
    }
}

#[test]
fn serve_lists_the_activity() {
    let tmp = init_project();
    let dir = tmp.path().join("p");
    let server = Server::start(&dir, &dir.join("data"));
    let r = Session::anonymous(&server).get("/activities");
    assert_eq!(r.status, 200);
    let names: Vec<&str> = r.body.as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["GradeThesis"]);
}

#[test]
fn serve_on_a_busy_port_exits_with_2() {
    let tmp = init_project();
    let dir = tmp.path().join("p");
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = run(&["serve", path_arg(&dir), "--port", &port, "--data", path_arg(&dir.join("data"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn serve_with_model_errors_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["serve", path_arg(tmp.path()), "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no application model found"));
}

#[test]
fn restart_keeps_objects_and_seeds_once() {
    let tmp = init_project();
    let dir = tmp.path().join("p");
    let data = tmp.path().join("store");
    let server = Server::start(&dir, &data);
    let s = Session::login(&server, "ref1", "ref1-secret");
    let r = s.post("/class/Staff", json!({"login": "kim", "password": "pw", "name": "Kim", "role": "lecturer"}));
    assert_eq!(r.status, 201);
    server.stop();

    let server = Server::start(&dir, &data);
    let s = Session::login(&server, "kim", "pw");
    let list = s.get("/class/Staff");
    let rows = list.body["elements"][1]["rows"].as_array().unwrap().clone();
    let logins: Vec<&str> = rows.iter().map(|r| r["values"][0].as_str().unwrap()).collect();
    assert_eq!(logins, ["ref1", "ref2", "kim"]);
}
