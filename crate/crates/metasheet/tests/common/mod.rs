#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use metasheet::service::{router, AppState, ServiceConfig};
use metasheet::{TemplateStore, TerminologyClient, TerminologyConfig};
use metasheet_core::vocab::resolve_inline;
use metasheet_core::{parse_template, Template, ValidationReport, ValueSet};
use serde_json::Value;
use tower::ServiceExt;

pub const FIVE_ISSUES: &[u8] = include_bytes!("../fixtures/five_issues.tsv");
pub const DONOR_SEEDED: &[u8] = include_bytes!("../fixtures/donor_seeded.tsv");

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load_template(id: &str) -> Template {
    let path = fixture_dir().join("templates").join(format!("{id}.json"));
    parse_template(&std::fs::read(path).unwrap()).unwrap()
}

pub fn sample_template() -> Template {
    load_template("tmpl-sample-v1")
}

pub fn inline_sets(template: &Template) -> BTreeMap<String, ValueSet> {
    template
        .fields
        .iter()
        .filter_map(|f| Some((f.name.clone(), resolve_inline(f.value_set.as_ref()?)?)))
        .collect()
}

pub fn terminology() -> TerminologyClient {
    TerminologyClient::new(TerminologyConfig::fixtures(fixture_dir().join("terminology")))
}

pub fn app_with(tweak: impl FnOnce(&mut ServiceConfig)) -> Router {
    let store = TemplateStore::in_memory();
    for id in ["tmpl-sample-v1", "tmpl-donor-v2"] {
        store.put(load_template(id)).unwrap();
    }
    let mut config = ServiceConfig::default();
    tweak(&mut config);
    router(AppState::new(store, terminology(), config))
}

pub fn app() -> Router {
    app_with(|_| {})
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn post_tsv(uri: &str, body: &[u8]) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "text/tab-separated-values")
        .body(Body::from(body.to_vec()))
        .unwrap()
}

pub fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub fn put_json(uri: &str, body: Value) -> Request<Body> {
    Request::put(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

/// `(name, filename, data)` parts.
pub fn multipart(uri: &str, parts: &[(&str, Option<&str>, &[u8])]) -> Request<Body> {
    let boundary = "XmetasheetBoundaryX";
    let mut body = Vec::new();
    for (name, filename, data) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        match filename {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: application/octet-stream\r\n\r\n").as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    Request::post(uri)
        .header("content-type", format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

/// Uploads a TSV and returns the session id.
pub async fn open_session(app: &Router, tsv: &[u8]) -> String {
    let (status, headers, body) = send(app, post_tsv("/validate", tsv)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    headers["x-session-id"].to_str().unwrap().to_string()
}

/// Report JSON with the wall-clock stamp removed.
pub fn strip_stamp(body: &[u8]) -> String {
    let mut report: ValidationReport = serde_json::from_slice(body).unwrap();
    report.generated_at = None;
    report.to_json()
}
