//! Loading a model directory: every `.cd`, `.act`, `.page`, and `.app` file
//! directly inside it (subdirectories are not searched), parsed and linked.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::linker::{link, LinkedSystem};
use crate::store::{Store, StoreError};
use crate::syntax::{parse_by_extension, Diagnostic, Location, Model};
use crate::value::{from_json, ObjectId};

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{} error(s) in the models", .0.iter().filter(|d| d.is_error()).count())]
    Invalid(Vec<Diagnostic>),
}

impl ProjectError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ProjectError::Invalid(d) => d,
            ProjectError::Io { .. } => &[],
        }
    }
}

pub const MODEL_EXTENSIONS: [&str; 4] = ["cd", "act", "page", "app"];

/// The model files of `dir` as `(file name, contents)`, sorted by name.
pub fn read_model_files(dir: &Path) -> Result<Vec<(String, String)>, ProjectError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ProjectError::Io { path, source }
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        if !path.is_file() || !MODEL_EXTENSIONS.contains(&ext) {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        files.push((name, text));
    }
    files.sort();
    Ok(files)
}

/// Parses and links a set of model sources. `origin` labels project-level
/// diagnostics (typically the directory).
pub fn load_sources(origin: &str, files: &[(String, String)]) -> Result<LinkedSystem, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut classes = Vec::new();
    let mut activities = Vec::new();
    let mut pages = Vec::new();
    let mut apps = Vec::new();
    for (name, text) in files {
        match parse_by_extension(name, text) {
            None => {}
            Some(Err(mut d)) => diags.append(&mut d),
            Some(Ok(Model::Class(m))) => classes.push(m),
            Some(Ok(Model::Activity(m))) => activities.push(m),
            Some(Ok(Model::Page(m))) => pages.push(m),
            Some(Ok(Model::App(m))) => apps.push(m),
        }
    }
    let project = |message: &str| Diagnostic::error(Location::new(origin, 1, 1), "project", message);
    match apps.len() {
        0 => diags.push(project("no application model found")),
        1 => {}
        _ => diags.push(project("more than one application model found")),
    }
    match classes.len() {
        0 => diags.push(project("no class model found")),
        1 => {}
        _ => diags.push(project("more than one class model found")),
    }
    if diags.iter().any(Diagnostic::is_error) || apps.len() != 1 || classes.len() != 1 {
        return Err(diags);
    }
    let (Some(class_model), Some(app)) = (classes.pop(), apps.pop()) else { return Err(diags) };
    let mut system = link(class_model, activities, pages, app)?;
    diags.append(&mut system.warnings);
    system.warnings = diags;
    Ok(system)
}

pub fn load_dir(dir: &Path) -> Result<LinkedSystem, ProjectError> {
    let files = read_model_files(dir)?;
    load_sources(&dir.display().to_string(), &files).map_err(ProjectError::Invalid)
}

#[derive(Debug, Deserialize)]
struct SeedFile {
    objects: Vec<SeedObject>,
}

#[derive(Debug, Deserialize)]
struct SeedObject {
    class: String,
    /// Optional name other seed objects can link to.
    key: Option<String>,
    #[serde(default)]
    fields: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    links: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("malformed seed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("seed object {index} ({class}): {message}")]
    Object { index: usize, class: String, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Creates the objects listed in a seed document. Links name earlier
/// objects by their `key`. Returns the number of objects created.
pub fn seed_store(store: &Store, seed: &str) -> Result<usize, SeedError> {
    let file: SeedFile = serde_json::from_str(seed)?;
    let mut keys: HashMap<String, ObjectId> = HashMap::new();
    for (index, obj) in file.objects.iter().enumerate() {
        let fail = |message: String| SeedError::Object {
            index,
            class: obj.class.clone(),
            message,
        };
        let class = store
            .schema()
            .class(&obj.class)
            .ok_or_else(|| fail("unknown class".into()))?;
        let mut fields = BTreeMap::new();
        for (name, value) in &obj.fields {
            let attr = class
                .attribute(name)
                .ok_or_else(|| fail(format!("no attribute `{name}`")))?;
            fields.insert(name.clone(), from_json(attr.ty, value).map_err(|m| fail(format!("{name}: {m}")))?);
        }
        let mut links = BTreeMap::new();
        for (role, targets) in &obj.links {
            let ids = targets
                .iter()
                .map(|k| keys.get(k).cloned().ok_or_else(|| fail(format!("no earlier object with key `{k}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            links.insert(role.clone(), ids);
        }
        let created = store
            .create_object(&obj.class, fields, links)
            .map_err(|e| fail(e.to_string()))?;
        if let Some(k) = &obj.key {
            keys.insert(k.clone(), created.id);
        }
    }
    Ok(file.objects.len())
}

pub const SEED_FILE: &str = "seed.json";

/// Marker left in a data directory once its seed file was loaded.
pub const SEEDED_MARKER: &str = ".seeded";

/// Loads `<model_dir>/seed.json` into `store` unless the store's data
/// directory carries the seeded marker. In-memory stores are always seeded.
/// Returns the number of objects created, `None` when nothing was loaded.
pub fn seed_once(store: &Store, model_dir: &Path) -> Result<Option<usize>, SeedError> {
    let seed = model_dir.join(SEED_FILE);
    let marker = store.dir().map(|d| d.join(SEEDED_MARKER));
    if marker.as_ref().is_some_and(|m| m.exists()) || !seed.is_file() {
        return Ok(None);
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SeedError::Io { path, source }
    };
    let text = fs::read_to_string(&seed).map_err(io_err(&seed))?;
    let n = seed_store(store, &text)?;
    if let Some(m) = marker {
        fs::write(&m, "").map_err(io_err(&m))?;
    }
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn sources() -> Vec<(String, String)> {
        fixture::model_files()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s.to_string()))
            .collect()
    }

    #[test]
    fn fixture_links_cleanly() {
        let system = load_sources("fixture", &sources()).unwrap();
        assert!(system.warnings.iter().all(|d| !d.is_error()));
        assert!(system.activity("GradeThesis").is_some());
        assert_eq!(system.pages.len(), 5);
    }

    #[test]
    fn empty_project_has_no_application_model() {
        let diags = load_sources("empty", &[]).unwrap_err();
        assert!(diags.iter().any(|d| d.message == "no application model found"));
    }

    #[test]
    fn seed_creates_users() {
        let system = load_sources("fixture", &sources()).unwrap();
        let store = Store::in_memory(system.class_model.clone());
        assert_eq!(seed_store(&store, fixture::SEED).unwrap(), 2);
        assert!(store.authenticate("ref1", "ref1-secret").is_ok());
        assert!(store.authenticate("ref2", "ref2-secret").is_ok());
    }

    #[test]
    fn seed_links_by_key() {
        let system = load_sources("fixture", &sources()).unwrap();
        let store = Store::in_memory(system.class_model.clone());
        let seed = r#"{"objects": [
            {"class": "Staff", "key": "a", "fields": {"login": "a", "password": "p"}},
            {"class": "ThesisData", "fields": {"grade1": 1.3}, "links": {"primaryRef": ["a"]}}
        ]}"#;
        seed_store(&store, seed).unwrap();
        let thesis = &store.load_all("ThesisData").unwrap()[0];
        let staff = &store.load_all("Staff").unwrap()[0];
        assert_eq!(thesis.links["primaryRef"], vec![staff.id.clone()]);
    }

    #[test]
    fn seed_once_writes_marker() {
        let system = load_sources("fixture", &sources()).unwrap();
        let models = tempfile::tempdir().unwrap();
        fixture::write_project(models.path()).unwrap();
        let data = tempfile::tempdir().unwrap();
        let store = Store::open(data.path(), system.class_model.clone()).unwrap();
        assert_eq!(seed_once(&store, models.path()).unwrap(), Some(2));
        assert_eq!(seed_once(&store, models.path()).unwrap(), None);
        assert_eq!(store.load_all("Staff").unwrap().len(), 2);
    }

    #[test]
    fn seed_rejects_bad_email() {
        let system = load_sources("fixture", &sources()).unwrap();
        let store = Store::in_memory(system.class_model.clone());
        let seed = r#"{"objects": [{"class": "Staff", "fields": {"login": "a", "password": "p", "email": "nope"}}]}"#;
        assert!(matches!(seed_store(&store, seed), Err(SeedError::Object { .. })));
    }
}
