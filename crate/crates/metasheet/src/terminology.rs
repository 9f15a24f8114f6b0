//! Value-set resolution for controlled fields.
//!
//! Inline bindings resolve locally. Terminology bindings are looked up either
//! in a fixture directory (`<dir>/<source_id>/<branch_id>.json`) or from a
//! live service at `<base_url>/<source_id>/<branch_id>`. Both return the
//! same JSON shape:
//!
//! ```json
//! {"id": "units/time", "labels": ["Year"], "synonyms": {"Year": ["yr"]}}
//! ```
//!
//! Results are cached in memory per (source, branch) for a configurable
//! time-to-live.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use metasheet_core::vocab::resolve_inline;
use metasheet_core::{Datatype, Template, ValueSet, ValueSetBinding};
use thiserror::Error;

pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fixture,
    Live,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fixture => "fixture",
            Mode::Live => "live",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture" => Ok(Mode::Fixture),
            "live" => Ok(Mode::Live),
            other => Err(format!("unknown terminology mode {other:?} (expected fixture or live)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TerminologyConfig {
    pub mode: Mode,
    pub fixture_dir: Option<PathBuf>,
    pub base_url: Option<String>,
    /// Sent as `Authorization: apikey token=<key>` in live mode.
    pub api_key: Option<String>,
    pub ttl: Duration,
}

impl Default for TerminologyConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fixture,
            fixture_dir: None,
            base_url: None,
            api_key: None,
            ttl: DEFAULT_TTL,
        }
    }
}

impl TerminologyConfig {
    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        Self {
            fixture_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn live(base_url: impl Into<String>) -> Self {
        Self {
            mode: Mode::Live,
            base_url: Some(base_url.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TerminologyError {
    #[error("unknown value set {source_id}/{branch_id}")]
    Unknown { source_id: String, branch_id: String },
    #[error("terminology service unreachable: {0}")]
    Unreachable(String),
    #[error("fixture file {0} is missing")]
    FixtureMissing(PathBuf),
    #[error("malformed value set {source_id}/{branch_id}: {message}")]
    Malformed {
        source_id: String,
        branch_id: String,
        message: String,
    },
    #[error("terminology client is not configured: {0}")]
    NotConfigured(&'static str),
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Minimal blocking GET, injectable so tests can observe network use.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse, String>;
}

/// [`Transport`] backed by `ureq`.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str, headers: &[(&str, String)]) -> Result<HttpResponse, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        let mut req = agent.get(url).header("Accept", "application/json");
        for (name, value) in headers {
            req = req.header(*name, value.as_str());
        }
        let mut resp = req.call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

struct CacheEntry {
    fetched: Instant,
    set: Arc<ValueSet>,
}

pub struct TerminologyClient {
    config: TerminologyConfig,
    transport: Arc<dyn Transport>,
    cache: RwLock<HashMap<(String, String), CacheEntry>>,
}

impl fmt::Debug for TerminologyClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminologyClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn encode_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Fixture and path segments must not escape their directory.
fn safe_segment(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\'])
}

impl TerminologyClient {
    pub fn new(config: TerminologyConfig) -> Self {
        Self::with_transport(config, Arc::new(HttpTransport))
    }

    pub fn with_transport(config: TerminologyConfig, transport: Arc<dyn Transport>) -> Self {
        Self {
            config,
            transport,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn config(&self) -> &TerminologyConfig {
        &self.config
    }

    pub fn resolve_value_set(&self, binding: &ValueSetBinding) -> Result<Arc<ValueSet>, TerminologyError> {
        let (source_id, branch_id) = match binding {
            ValueSetBinding::Inline { .. } => {
                return Ok(Arc::new(resolve_inline(binding).expect("inline binding")));
            }
            ValueSetBinding::Terminology { source_id, branch_id } => (source_id, branch_id),
        };
        let key = (source_id.clone(), branch_id.clone());
        if let Some(entry) = self.cache.read().expect("cache lock").get(&key) {
            if entry.fetched.elapsed() < self.config.ttl {
                return Ok(entry.set.clone());
            }
        }
        let set = Arc::new(self.fetch(source_id, branch_id)?);
        self.cache.write().expect("cache lock").insert(
            key,
            CacheEntry {
                fetched: Instant::now(),
                set: set.clone(),
            },
        );
        Ok(set)
    }

    fn fetch(&self, source_id: &str, branch_id: &str) -> Result<ValueSet, TerminologyError> {
        let unknown = || TerminologyError::Unknown {
            source_id: source_id.to_string(),
            branch_id: branch_id.to_string(),
        };
        if !safe_segment(source_id) || !safe_segment(branch_id) {
            return Err(unknown());
        }
        let body = match self.config.mode {
            Mode::Fixture => {
                let dir = self
                    .config
                    .fixture_dir
                    .as_ref()
                    .ok_or(TerminologyError::NotConfigured("fixture mode needs a fixture directory"))?;
                let path = dir.join(source_id).join(format!("{branch_id}.json"));
                std::fs::read(&path).map_err(|_| TerminologyError::FixtureMissing(path))?
            }
            Mode::Live => {
                let base = self
                    .config
                    .base_url
                    .as_ref()
                    .ok_or(TerminologyError::NotConfigured("live mode needs a base URL"))?;
                let url = format!(
                    "{}/{}/{}",
                    base.trim_end_matches('/'),
                    encode_segment(source_id),
                    encode_segment(branch_id)
                );
                let headers: Vec<(&str, String)> = self
                    .config
                    .api_key
                    .iter()
                    .map(|k| ("Authorization", format!("apikey token={k}")))
                    .collect();
                let resp = self
                    .transport
                    .get(&url, &headers)
                    .map_err(TerminologyError::Unreachable)?;
                match resp.status {
                    200..=299 => resp.body,
                    404 => return Err(unknown()),
                    status => {
                        return Err(TerminologyError::Unreachable(format!("{url} answered HTTP {status}")))
                    }
                }
            }
        };
        let malformed = |message: String| TerminologyError::Malformed {
            source_id: source_id.to_string(),
            branch_id: branch_id.to_string(),
            message,
        };
        let set: ValueSet = serde_json::from_slice(&body).map_err(|e| malformed(e.to_string()))?;
        set.check().map_err(|e| malformed(e.to_string()))?;
        Ok(set)
    }

    /// Resolves the value set of every controlled field, keyed by field name.
    pub fn resolve_template_sets(
        &self,
        template: &Template,
    ) -> Result<BTreeMap<String, ValueSet>, TerminologyError> {
        let mut out = BTreeMap::new();
        for field in &template.fields {
            if field.datatype != Datatype::Controlled {
                continue;
            }
            if let Some(binding) = &field.value_set {
                let set = self.resolve_value_set(binding)?;
                out.insert(field.name.clone(), (*set).clone());
            }
        }
        Ok(out)
    }
}
