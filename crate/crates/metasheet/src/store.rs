//! Registered templates, optionally persisted as `<dir>/<id>.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use metasheet_core::{parse_template, serialize_template, Template, TemplateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: TemplateError,
    },
}

#[derive(Debug, Default)]
pub struct TemplateStore {
    dir: Option<PathBuf>,
    templates: RwLock<BTreeMap<String, Arc<Template>>>,
}

impl TemplateStore {
    /// A store that keeps templates in memory only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads every `*.json` document in `dir`. A missing directory is
    /// created; an invalid document fails the whole load.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut templates = BTreeMap::new();
        for path in paths {
            let bytes = std::fs::read(&path).map_err(io(&path))?;
            let t = parse_template(&bytes).map_err(|source| StoreError::Invalid {
                path: path.clone(),
                source,
            })?;
            templates.insert(t.id.clone(), Arc::new(t));
        }
        Ok(Self {
            dir: Some(dir),
            templates: RwLock::new(templates),
        })
    }

    pub fn get(&self, id: &str) -> Option<Arc<Template>> {
        self.templates.read().expect("store lock").get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<Template>> {
        self.templates.read().expect("store lock").values().cloned().collect()
    }

    /// Registers or replaces a template. Returns `true` when the id was new.
    pub fn put(&self, template: Template) -> Result<bool, StoreError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.json", template.id));
            std::fs::write(&path, serialize_template(&template))
                .map_err(|source| StoreError::Io { path, source })?;
        }
        let mut map = self.templates.write().expect("store lock");
        Ok(map.insert(template.id.clone(), Arc::new(template)).is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use metasheet_core::{Datatype, FieldSpec};

    fn t(id: &str) -> Template {
        Template::new(id, "T", "1", vec![FieldSpec::new("a", Datatype::Text)]).unwrap()
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let store = TemplateStore::open(dir.path()).unwrap();
        assert!(store.put(t("one")).unwrap());
        assert!(!store.put(t("one")).unwrap());
        let again = TemplateStore::open(dir.path()).unwrap();
        assert_eq!(*again.get("one").unwrap(), t("one"));
        assert_eq!(again.list().len(), 1);
    }

    #[test]
    fn invalid_document_fails_load() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.json"), "{}").unwrap();
        assert!(matches!(TemplateStore::open(dir.path()), Err(StoreError::Invalid { .. })));
    }
}
