mod common;

use common::*;
use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use std::net::SocketAddr;
use std::time::Duration;
use telewaypoint_core::map::load_map;
use telewaypoint_core::selection::{aim_at, ArcConfig, Vec3, HAND_HEIGHT};
use telewaypoint_core::geometry::Point2D;
use telewaypoint_core::wire::WireCommand;
use telewaypoint_server::state::{lock, CreateSession};
use telewaypoint_server::store::Mode;
use telewaypoint_server::{router, AppState};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::{self, Message};
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn serve(state: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    addr
}

async fn connect(addr: SocketAddr, id: &str) -> Result<Ws, tungstenite::Error> {
    connect_async(format!("ws://{addr}/api/sessions/{id}/stream")).await.map(|(ws, _)| ws)
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::text(v.to_string())).await.unwrap();
}

/// Next server message, failing after five seconds of silence.
async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("message").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn recv_until(ws: &mut Ws, pred: impl Fn(&Value) -> bool) -> (Value, Vec<Value>) {
    let mut seen = vec![];
    for _ in 0..2000 {
        let v = recv(ws).await;
        if pred(&v) {
            return (v, seen);
        }
        seen.push(v);
    }
    panic!("condition never met");
}

fn create(state: &AppState, order: &str, mode: Mode) -> String {
    let req = CreateSession { map: None, order: order.into(), seed: 3, participant: None, mode };
    lock(&state.create(&req).unwrap()).meta.id.clone()
}

fn is_frame(v: &Value) -> bool {
    v["type"] == "frame"
}

#[tokio::test]
async fn delayed_drive_takes_effect_fifty_ticks_after_receipt() {
    let dir = tempfile::tempdir().unwrap();
    let state = state_with_corridor(dir.path());
    let id = create(&state, "DCFirst", Mode::Interactive);
    let entry = state.get(&id).unwrap();
    lock(&entry).session.start_next_trial().unwrap();
    finish_trial_directly(&entry);
    let addr = serve(state.clone()).await;

    let mut ws = connect(addr, &id).await.unwrap();
    send(&mut ws, json!({"kind": "start_trial"})).await;
    let (started, _) = recv_until(&mut ws, |v| v["type"] == "trial_started").await;
    assert_eq!(started["trial"], 1);
    assert_eq!(started["spec"]["delay"], 1.0);
    send(&mut ws, json!({"kind": "drive", "y_axis": 1.0, "x_axis": 0.0})).await;
    let (moving, before) = recv_until(&mut ws, |v| is_frame(v) && v["linear_vel"].as_f64().unwrap() > 0.0).await;
    drop(ws);

    let log = lock(&entry).session.log().to_jsonl();
    let cmd_tick = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|r| r["kind"] == "command" && r["data"]["trial"] == 1 && r["data"]["cmd"]["kind"] == "drive")
        .expect("drive logged")["data"]["tick"]
        .as_u64()
        .unwrap();
    // frame ticks count completed steps: the step that applies the command starts at tick + 50
    assert_eq!(moving["tick"].as_u64().unwrap(), cmd_tick + 50 + 1);
    let ticks: Vec<u64> = before.iter().filter(|v| is_frame(v)).map(|v| v["tick"].as_u64().unwrap()).collect();
    assert!(ticks.windows(2).all(|w| w[1] == w[0] + 1), "frames ordered by tick");
}

#[tokio::test]
async fn stop_grip_halts_navigation_on_delivery() {
    let dir = tempfile::tempdir().unwrap();
    let state = state_with_corridor(dir.path());
    let id = create(&state, "WCFirst", Mode::Interactive);
    let addr = serve(state.clone()).await;
    let mut ws = connect(addr, &id).await.unwrap();
    send(&mut ws, json!({"kind": "start_trial"})).await;
    recv_until(&mut ws, |v| v["type"] == "trial_started").await;

    let start = load_map(&corridor_text()).unwrap().start_pose;
    let hand = Vec3::new(start.x, start.y, HAND_HEIGHT);
    let pose = aim_at(hand, Point2D::new(start.x + 3.0, start.y), &ArcConfig::default()).unwrap();
    let lines: Vec<String> = [WireCommand::AimBegin, WireCommand::AimUpdate(pose), WireCommand::AimRelease, WireCommand::Confirm]
        .iter()
        .map(|c| serde_json::to_string(c).unwrap())
        .collect();
    ws.send(Message::text(lines.join("\n"))).await.unwrap();
    let (nav, _) = recv_until(&mut ws, |v| is_frame(v) && v["linear_vel"].as_f64().unwrap() > 0.1).await;
    assert!(!nav["nav_target"].is_null());
    assert!(nav["path"].as_array().unwrap().len() >= 2);

    send(&mut ws, json!({"kind": "stop_grip"})).await;
    let (stopped, _) = recv_until(&mut ws, |v| is_frame(v) && v["linear_vel"] == 0.0).await;
    assert!(stopped["path"].as_array().unwrap().is_empty());
    assert!(stopped["nav_target"].is_null());
    for _ in 0..10 {
        let f = recv_until(&mut ws, is_frame).await.0;
        assert_eq!(f["linear_vel"], 0.0);
        assert_eq!(f["pose"], stopped["pose"]);
    }
}

#[tokio::test]
async fn stimulus_response_is_acknowledged_in_the_next_frame() {
    let dir = tempfile::tempdir().unwrap();
    let state = state_with_corridor(dir.path());
    let id = create(&state, "DCFirst", Mode::Interactive);
    let entry = state.get(&id).unwrap();
    let shown = {
        let mut e = lock(&entry);
        e.session.start_next_trial().unwrap();
        loop {
            e.session.tick().unwrap();
            if let Some(s) = e.session.last_frame().unwrap().stimuli.first() {
                break *s;
            }
        }
    };
    let addr = serve(state.clone()).await;
    let mut ws = connect(addr, &id).await.unwrap();
    send(&mut ws, json!({"kind": "switch_method", "method": "waypoint"})).await;
    let (err, _) = recv_until(&mut ws, |v| v["type"] == "error").await;
    assert_eq!(err["error"], "NotBonusTrial");
    send(&mut ws, json!({"kind": "teleport"})).await;
    let (err, _) = recv_until(&mut ws, |v| v["type"] == "error").await;
    assert_eq!(err["error"], "BadRequest");

    send(&mut ws, json!({"kind": "stimulus_response", "button": shown.direction})).await;
    let (ack, _) = recv_until(&mut ws, |v| is_frame(v) && !v["last_response"].is_null()).await;
    assert_eq!(ack["last_response"]["correct"], true);
    assert_eq!(ack["last_response"]["stimulus"], shown.id);
    assert!(ack["stimuli"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn one_stream_per_session() {
    let dir = tempfile::tempdir().unwrap();
    let state = state_with_corridor(dir.path());
    let id = create(&state, "DCFirst", Mode::Interactive);
    let addr = serve(state.clone()).await;
    let first = connect(addr, &id).await.unwrap();
    match connect(addr, &id).await {
        Err(tungstenite::Error::Http(resp)) => assert_eq!(resp.status(), 409),
        other => panic!("expected SessionBusy, got {:?}", other.map(|_| ())),
    }
    drop(first);
    let mut reconnected = None;
    for _ in 0..50 {
        tokio::time::sleep(Duration::from_millis(20)).await;
        if let Ok(ws) = connect(addr, &id).await {
            reconnected = Some(ws);
            break;
        }
    }
    assert!(reconnected.is_some(), "stream released after disconnect");

    let req = CreateSession { map: None, order: "WCFirst".into(), seed: 2, participant: None, mode: Mode::Bot };
    let done = telewaypoint_server::headless::create_bot_session(&state, &req).unwrap();
    match connect(addr, &done).await {
        Err(tungstenite::Error::Http(resp)) => {
            assert_eq!(resp.status(), 409);
            let body: Value = serde_json::from_slice(resp.body().as_ref().unwrap()).unwrap();
            assert_eq!(body["error"], "SessionComplete");
        }
        other => panic!("expected SessionComplete, got {:?}", other.map(|_| ())),
    }
}

#[tokio::test]
async fn disconnect_mid_trial_leaves_a_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let state = state_with_corridor(dir.path());
    let id = create(&state, "DCFirst", Mode::Interactive);
    let addr = serve(state.clone()).await;
    let mut ws = connect(addr, &id).await.unwrap();
    send(&mut ws, json!({"kind": "start_trial"})).await;
    send(&mut ws, json!({"kind": "drive", "y_axis": 1.0, "x_axis": 0.1})).await;
    for _ in 0..30 {
        recv_until(&mut ws, is_frame).await;
    }
    ws.close(None).await.unwrap();
    let entry = state.get(&id).unwrap();
    for _ in 0..100 {
        if !lock(&entry).streaming {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let hash = lock(&entry).session.state_hash();
    let restored = state_with_corridor(dir.path());
    assert!(restored.load_existing().unwrap().is_empty());
    assert_eq!(lock(&restored.get(&id).unwrap()).session.state_hash(), hash);
}
