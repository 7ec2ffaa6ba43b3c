use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

const INDEX_FILE: &str = ".umax-index.json";
const CONTAINER_TYPE: &str = "application/json";
const DEFAULT_CONTENT_TYPE: &str = "application/octet-stream";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredResource {
    /// Normalized rooted path; containers end with `/`.
    pub path: String,
    pub content_type: String,
    pub body: Vec<u8>,
    pub resource_type: Option<String>,
}

impl StoredResource {
    pub fn new(path: impl Into<String>, content_type: impl Into<String>, body: Vec<u8>) -> Self {
        Self { path: path.into(), content_type: content_type.into(), body, resource_type: None }
    }

    pub fn container(path: impl Into<String>) -> Self {
        Self::new(path, CONTAINER_TYPE, Vec::new())
    }

    pub fn with_type(mut self, resource_type: impl Into<String>) -> Self {
        self.resource_type = Some(resource_type.into());
        self
    }

    pub fn is_container(&self) -> bool {
        self.path.ends_with('/')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid resource path `{0}`")]
pub struct PathError(pub String);

/// Rejects dot segments, empty segments and relative paths instead of
/// resolving them, so one resource has exactly one spelling.
pub fn normalize_path(path: &str) -> Result<String, PathError> {
    let bad = || PathError(path.to_owned());
    let rest = path.strip_prefix('/').ok_or_else(bad)?;
    if rest.is_empty() {
        return Ok("/".into());
    }
    let trimmed = rest.strip_suffix('/').unwrap_or(rest);
    for seg in trimmed.split('/') {
        if seg.is_empty() || seg == "." || seg == ".." || seg.starts_with(".umax-") {
            return Err(bad());
        }
    }
    Ok(path.to_owned())
}

/// `/a/b/` for `/a/b/c` and for `/a/b/c/`; `None` for `/`.
pub fn parent_of(path: &str) -> Option<&str> {
    if path == "/" {
        return None;
    }
    let trimmed = path.strip_suffix('/').unwrap_or(path);
    trimmed.rfind('/').map(|i| &path[..=i])
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IndexEntry {
    content_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resource_type: Option<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub resource: StoredResource,
    pub registration: Option<String>,
}

/// Path-keyed resources, optionally mirrored to a directory. The root
/// container always exists.
#[derive(Debug)]
pub struct Store {
    entries: BTreeMap<String, Entry>,
    dir: Option<PathBuf>,
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("/".into(), Entry { resource: StoredResource::container("/"), registration: None });
        Self { entries, dir: None }
    }

    /// Copies a directory tree into memory; later writes stay in memory.
    pub fn load(dir: &Path) -> io::Result<Self> {
        let mut store = Self::in_memory();
        let index: BTreeMap<String, IndexEntry> = match fs::read(dir.join(INDEX_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        walk(dir, "/", &mut |path, body| {
            let meta = index.get(path).cloned().unwrap_or_default();
            let content_type = match (body.is_some(), meta.content_type.is_empty()) {
                (false, _) => CONTAINER_TYPE.to_owned(),
                (true, true) => DEFAULT_CONTENT_TYPE.to_owned(),
                (true, false) => meta.content_type,
            };
            let resource = StoredResource {
                path: path.to_owned(),
                content_type,
                body: body.unwrap_or_default(),
                resource_type: meta.resource_type,
            };
            store.entries.insert(path.to_owned(), Entry { resource, registration: None });
        })?;
        Ok(store)
    }

    /// Like [`Store::load`], but every later write is persisted to `dir`.
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut store = Self::load(dir)?;
        store.dir = Some(dir.to_owned());
        Ok(store)
    }

    pub fn get(&self, path: &str) -> Option<&StoredResource> {
        self.entries.get(path).map(|e| &e.resource)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn children(&self, container: &str) -> Vec<String> {
        self.entries.keys().filter(|p| p.as_str() != container && parent_of(p) == Some(container)).cloned().collect()
    }

    /// Adds or replaces a resource without registering it; startup
    /// registration picks it up.
    pub fn add(&mut self, resource: StoredResource) -> io::Result<()> {
        self.insert(resource, None)
    }

    pub(crate) fn entry(&self, path: &str) -> Option<&Entry> {
        self.entries.get(path)
    }

    pub(crate) fn set_registration(&mut self, path: &str, id: Option<String>) {
        if let Some(e) = self.entries.get_mut(path) {
            e.registration = id;
        }
    }

    /// Paths of the missing ancestors of `path`, outermost first.
    pub(crate) fn missing_ancestors(&self, path: &str) -> Vec<String> {
        let mut missing = Vec::new();
        let mut cur = parent_of(path);
        while let Some(p) = cur {
            if self.entries.contains_key(p) {
                break;
            }
            missing.push(p.to_owned());
            cur = parent_of(p);
        }
        missing.reverse();
        missing
    }

    /// Nearest existing container at or above `path`'s parent.
    pub(crate) fn nearest_container(&self, path: &str) -> String {
        let mut cur = parent_of(path);
        while let Some(p) = cur {
            if self.entries.contains_key(p) {
                return p.to_owned();
            }
            cur = parent_of(p);
        }
        "/".into()
    }

    pub(crate) fn insert(&mut self, resource: StoredResource, registration: Option<String>) -> io::Result<()> {
        if let Some(dir) = &self.dir {
            let target = fs_path(dir, &resource.path);
            if resource.is_container() {
                fs::create_dir_all(&target)?;
            } else {
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&target, &resource.body)?;
            }
        }
        self.entries.insert(resource.path.clone(), Entry { resource, registration });
        self.write_index()
    }

    pub(crate) fn remove(&mut self, path: &str) -> io::Result<Option<Entry>> {
        if let Some(dir) = &self.dir {
            let target = fs_path(dir, path);
            let result = if path.ends_with('/') { fs::remove_dir(&target) } else { fs::remove_file(&target) };
            match result {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        let removed = self.entries.remove(path);
        self.write_index()?;
        Ok(removed)
    }

    fn write_index(&self) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let index: BTreeMap<&str, IndexEntry> = self
            .entries
            .values()
            .map(|e| {
                let r = &e.resource;
                (
                    r.path.as_str(),
                    IndexEntry { content_type: r.content_type.clone(), resource_type: r.resource_type.clone() },
                )
            })
            .collect();
        let tmp = dir.join(format!("{INDEX_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&index).expect("index serializes"))?;
        fs::rename(tmp, dir.join(INDEX_FILE))
    }
}

fn fs_path(dir: &Path, path: &str) -> PathBuf {
    dir.join(path.trim_start_matches('/'))
}

fn walk(dir: &Path, prefix: &str, visit: &mut dyn FnMut(&str, Option<Vec<u8>>)) -> io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with(".umax-") {
            continue;
        }
        if entry.file_type()?.is_dir() {
            let path = format!("{prefix}{name}/");
            visit(&path, None);
            walk(&entry.path(), &path, visit)?;
        } else {
            visit(&format!("{prefix}{name}"), Some(fs::read(entry.path())?));
        }
    }
    Ok(())
}
