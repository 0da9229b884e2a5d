//! Python bindings: check and pretty-print models, scaffold the example
//! project, and drive the REST API in-process.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use wisflow_core::engine::Engine;
use wisflow_core::fixture;
use wisflow_core::httpapi::{route_table, Api, ApiRequest};
use wisflow_core::project::{load_dir, load_sources, read_model_files, seed_once, ProjectError, SeedError};
use wisflow_core::store::Store;
use wisflow_core::syntax::{parse_by_extension, pretty_print, Diagnostic};

fn render(diags: &[Diagnostic]) -> Vec<String> {
    diags.iter().map(Diagnostic::to_string).collect()
}

fn project_error(e: ProjectError) -> PyErr {
    match e {
        ProjectError::Invalid(d) => PyValueError::new_err(render(&d).join("\n")),
        other => PyOSError::new_err(other.to_string()),
    }
}

/// Parses and links the model files of `dir`.
/// Returns `(ok, diagnostics)`; `ok` is false iff there are errors.
#[pyfunction]
fn check(dir: PathBuf) -> PyResult<(bool, Vec<String>)> {
    let files = read_model_files(&dir).map_err(project_error)?;
    Ok(check_files(&dir.display().to_string(), &files))
}

/// Like `check`, for in-memory sources given as `{file name: text}`.
#[pyfunction]
fn check_sources(files: HashMap<String, String>) -> (bool, Vec<String>) {
    let mut files: Vec<(String, String)> = files.into_iter().collect();
    files.sort();
    check_files("<sources>", &files)
}

fn check_files(origin: &str, files: &[(String, String)]) -> (bool, Vec<String>) {
    match load_sources(origin, files) {
        Ok(system) => (true, render(&system.warnings)),
        Err(diags) => (!diags.iter().any(Diagnostic::is_error), render(&diags)),
    }
}

/// Parses one model file and prints it in canonical layout. The file name's
/// extension selects the language.
#[pyfunction]
fn pretty(file_name: &str, source: &str) -> PyResult<String> {
    match parse_by_extension(file_name, source) {
        Some(Ok(model)) => Ok(pretty_print(&model)),
        Some(Err(d)) => Err(PyValueError::new_err(render(&d).join("\n"))),
        None => Err(PyValueError::new_err(format!("{file_name}: not a .cd, .act, .page, or .app file"))),
    }
}

/// Writes the thesis-grading example project into `dir`.
#[pyfunction]
fn init_project(dir: PathBuf) -> PyResult<()> {
    fixture::write_project(&dir).map_err(|e| PyOSError::new_err(e.to_string()))
}

/// The HTTP routes as `(method, path pattern)` pairs.
#[pyfunction]
fn routes() -> Vec<(&'static str, &'static str)> {
    route_table().to_vec()
}

/// A model directory served in-process. Requests take and return JSON
/// bodies as Python objects.
#[pyclass(module = "wisflow")]
struct App {
    api: Api,
}

#[pymethods]
impl App {
    /// Objects live in memory unless `data_dir` is given.
    #[new]
    #[pyo3(signature = (model_dir, data_dir = None))]
    fn new(model_dir: PathBuf, data_dir: Option<PathBuf>) -> PyResult<Self> {
        let system = load_dir(&model_dir).map_err(project_error)?;
        let schema = system.class_model.clone();
        let store = match data_dir {
            Some(d) => Store::open(&d, schema).map_err(|e| PyOSError::new_err(e.to_string()))?,
            None => Store::in_memory(schema),
        };
        seed_once(&store, &model_dir).map_err(|e| match e {
            SeedError::Io { .. } => PyOSError::new_err(e.to_string()),
            other => PyValueError::new_err(other.to_string()),
        })?;
        Ok(App {
            api: Api::new(Engine::new(system, store)),
        })
    }

    /// Returns `(status, location, body)`.
    #[pyo3(signature = (method, path, body = None, token = None))]
    fn request(
        &self,
        py: Python<'_>,
        method: &str,
        path: &str,
        body: Option<&Bound<'_, PyAny>>,
        token: Option<String>,
    ) -> PyResult<(u16, Option<String>, PyObject)> {
        let json = py.import_bound("json")?;
        let mut req = ApiRequest::new(method, path);
        req.bearer = token;
        if let Some(b) = body {
            req.body = json.call_method1("dumps", (b,))?.extract::<String>()?.into_bytes();
        }
        let reply = py.allow_threads(|| self.api.handle(&req));
        let text = serde_json::to_string(&reply.body).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let body = json.call_method1("loads", (text,))?.unbind();
        Ok((reply.status, reply.location, body))
    }

    /// Logs in and returns the session token.
    fn login(&self, py: Python<'_>, login: &str, password: &str) -> PyResult<String> {
        let body = serde_json::json!({"login": login, "password": password});
        let req = ApiRequest::new("POST", "/login").json(&body);
        let reply = py.allow_threads(|| self.api.handle(&req));
        match reply.body["token"].as_str() {
            Some(t) if reply.status == 200 => Ok(t.to_string()),
            _ => Err(PyValueError::new_err(format!("login failed with status {}", reply.status))),
        }
    }
}

#[pymodule]
fn wisflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(check_sources, m)?)?;
    m.add_function(wrap_pyfunction!(pretty, m)?)?;
    m.add_function(wrap_pyfunction!(init_project, m)?)?;
    m.add_function(wrap_pyfunction!(routes, m)?)?;
    m.add_class::<App>()?;
    Ok(())
}
