//! The realtime control loop: one WebSocket per session, ticking at dt.

use crate::error::ApiError;
use crate::protocol::{decode_line, ClientMessage, ServerMessage};
use crate::state::{lock, AppState, SharedEntry};
use crate::store::Store;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use std::time::Duration;
use tokio::time::MissedTickBehavior;

/// Releases the session when the stream ends. A trial left running gets a
/// suspend checkpoint so the stored log replays to this exact state.
struct StreamGuard {
    entry: SharedEntry,
    store: Store,
}

impl Drop for StreamGuard {
    fn drop(&mut self) {
        let mut e = lock(&self.entry);
        e.streaming = false;
        if e.session.is_trial_running() {
            e.session.checkpoint();
        }
        let _ = e.persist(&self.store);
    }
}

pub async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let dt = {
        let mut e = lock(&entry);
        if e.streaming {
            return Err(ApiError::SessionBusy);
        }
        if e.session.is_finished() && !e.session.is_trial_running() {
            return Err(ApiError::SessionComplete);
        }
        e.streaming = true;
        e.session.config.tick_duration()
    };
    let guard = StreamGuard { entry, store: state.store().clone() };
    Ok(ws.on_upgrade(move |socket| run(socket, guard, dt)))
}

#[derive(Default)]
struct Tracker {
    announced: Option<usize>,
}

fn handle_line(guard: &StreamGuard, line: &str) -> Vec<ServerMessage> {
    let mut e = lock(&guard.entry);
    let outcome = decode_line(line).and_then(|msg| match msg {
        ClientMessage::Command(cmd) => e.session.submit(cmd).map(|_| ()).map_err(ApiError::from),
        ClientMessage::StartTrial => {
            if e.session.is_finished() && !e.session.is_trial_running() {
                Err(ApiError::SessionComplete)
            } else {
                e.session.start_next_trial().map(|_| ()).map_err(ApiError::from)
            }
        }
        ClientMessage::AddBonus => {
            e.session.add_bonus();
            Ok(())
        }
    });
    let persisted = e.persist(&guard.store).map_err(ApiError::from);
    match outcome.and(persisted) {
        Ok(()) => vec![],
        Err(err) => vec![ServerMessage::Error(err.body())],
    }
}

fn step(guard: &StreamGuard, tracker: &mut Tracker) -> Vec<ServerMessage> {
    let mut e = lock(&guard.entry);
    if !e.session.is_trial_running() {
        return vec![];
    }
    let mut out = vec![];
    let index = e.session.trial().map(|t| t.index).expect("running trial");
    if tracker.announced != Some(index) {
        tracker.announced = Some(index);
        out.push(ServerMessage::TrialStarted { trial: index, spec: e.session.plan.trials[index] });
    }
    match e.session.tick() {
        Ok(frames) => out.extend(frames.into_iter().map(ServerMessage::Frame)),
        Err(err) => out.push(ServerMessage::Error(ApiError::from(err).body())),
    }
    if !e.session.is_trial_running() {
        if let Some(result) = e.session.results().last() {
            out.push(ServerMessage::TrialComplete { trial: result.trial, result: result.clone() });
        }
        if e.session.is_finished() {
            out.push(ServerMessage::SessionComplete);
        }
    }
    if let Err(err) = e.persist(&guard.store) {
        out.push(ServerMessage::Error(ApiError::from(err).body()));
    }
    out
}

async fn send_all(socket: &mut WebSocket, msgs: Vec<ServerMessage>) -> bool {
    for m in msgs {
        if socket.send(Message::Text(m.to_line().into())).await.is_err() {
            return false;
        }
    }
    true
}

async fn run(mut socket: WebSocket, guard: StreamGuard, dt: Duration) {
    let mut interval = tokio::time::interval(dt);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut tracker = Tracker::default();
    loop {
        let out = tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => text
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .flat_map(|l| handle_line(&guard, l))
                    .collect(),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => vec![],
            },
            _ = interval.tick() => step(&guard, &mut tracker),
        };
        if !send_all(&mut socket, out).await {
            break;
        }
    }
    drop(guard);
}
