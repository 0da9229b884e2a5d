//! Runs the `wisflow` binary and talks to it over real HTTP.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::redirect::Policy;
use serde_json::{json, Value};

pub fn wisflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wisflow"))
}

pub fn run(args: &[&str]) -> Output {
    wisflow().args(args).output().expect("run wisflow")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A `wisflow serve` child process, killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(dir: &Path, data: &Path) -> Server {
        let mut child = wisflow()
            .args(["serve", path_arg(dir), "--port", "0", "--data", path_arg(data)])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let stdout = child.stdout.take().unwrap();
        let mut lines = BufReader::new(stdout).lines();
        let base = loop {
            let line = match lines.next() {
                Some(Ok(l)) => l,
                _ => {
                    let status = child.wait().ok();
                    panic!("server exited before listening: {status:?}");
                }
            };
            if let Some(addr) = line.strip_prefix("listening on ") {
                break addr.trim().to_string();
            }
        };
        // keep draining stdout so the child never blocks on a full pipe
        std::thread::spawn(move || for _ in lines {});
        Server { child, base }
    }

    pub fn stop(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct Reply {
    pub status: u16,
    pub location: Option<String>,
    pub body: Value,
}

/// One HTTP session: a base URL and an optional bearer token.
pub struct Session {
    client: Client,
    base: String,
    pub token: Option<String>,
}

impl Session {
    pub fn anonymous(server: &Server) -> Session {
        let client = Client::builder()
            .redirect(Policy::none())
            .timeout(Duration::from_secs(10))
            .build()
            .unwrap();
        Session {
            client,
            base: server.base.clone(),
            token: None,
        }
    }

    pub fn login(server: &Server, login: &str, password: &str) -> Session {
        let mut s = Session::anonymous(server);
        let r = s.send("POST", "/login", Some(json!({"login": login, "password": password})));
        assert_eq!(r.status, 200, "login {login}: {}", r.body);
        s.token = Some(r.body["token"].as_str().unwrap().to_string());
        s
    }

    pub fn send(&self, method: &str, path: &str, body: Option<Value>) -> Reply {
        let method = reqwest::Method::from_bytes(method.as_bytes()).unwrap();
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().expect("http request");
        let status = resp.status().as_u16();
        let location = resp
            .headers()
            .get(reqwest::header::LOCATION)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let text = resp.text().unwrap_or_default();
        let body = serde_json::from_str(&text).unwrap_or(Value::Null);
        Reply { status, location, body }
    }

    pub fn get(&self, path: &str) -> Reply {
        self.send("GET", path, None)
    }

    pub fn post(&self, path: &str, body: Value) -> Reply {
        self.send("POST", path, Some(body))
    }
}
