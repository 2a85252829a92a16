#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use telewaypoint_core::map::load_map;
use telewaypoint_core::sim::DriveInput;
use telewaypoint_core::wire::WireCommand;
use telewaypoint_server::state::{lock, SharedEntry};
use telewaypoint_server::store::Store;
use telewaypoint_server::{router, AppState};
use tower::ServiceExt;

/// 10 m by 5 m open room, start and target 6.5 m apart.
pub fn corridor_text() -> String {
    let (w, h) = (40, 20);
    let mut text = String::new();
    for r in 0..h {
        for c in 0..w {
            let ch = if r == 0 || r == h - 1 || c == 0 || c == w - 1 {
                '#'
            } else if r == 10 && c == 4 {
                'S'
            } else if r == 10 && c == 30 {
                'T'
            } else {
                '.'
            };
            text.push(ch);
        }
        text.push('\n');
    }
    text
}

pub fn state_with_corridor(dir: &std::path::Path) -> AppState {
    let grid = load_map(&corridor_text()).unwrap();
    AppState::new(Store::new(dir), Some(("corridor".into(), grid)), None)
}

pub fn shipped_state(dir: &std::path::Path) -> AppState {
    AppState::new(Store::new(dir), None, None)
}

pub async fn call(state: &AppState, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub async fn call_json(state: &AppState, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = call(state, method, uri, body).await;
    (s, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

/// Drives the running trial straight ahead to the goal, bypassing the stream.
pub fn finish_trial_directly(entry: &SharedEntry) {
    let mut e = lock(entry);
    e.session.submit(WireCommand::Drive(DriveInput::new(1.0, 0.0))).unwrap();
    for _ in 0..5000 {
        if !e.session.is_trial_running() {
            return;
        }
        e.session.tick().unwrap();
    }
    panic!("trial did not finish");
}
