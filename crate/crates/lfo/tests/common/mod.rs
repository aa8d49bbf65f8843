#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use lfo_core::encoder::serialize_recording;
use lfo_core::encoder::synth::{fridge_demo, synthesize};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Fridge demo whose second utterance sits one edit away from both the
/// drawer and the door patterns.
pub fn ambiguous_fridge_recording() -> String {
    let mut script = fridge_demo();
    script.id = "fridge_ambiguous".into();
    script.steps[1].phrase = "open the fri ge".into();
    serialize_recording(&synthesize(&script).unwrap().recording)
}

/// A data directory holding the box demo and the ambiguous fridge demo.
pub fn data_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("box_demo.rec.json"), dir.path().join("box_demo.rec.json")).unwrap();
    std::fs::write(dir.path().join("fridge_ambiguous.rec.json"), ambiguous_fridge_recording()).unwrap();
    dir
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}
