//! REST routes.

use crate::error::ApiError;
use crate::headless::{combine, create_bot_session, ExportBundle};
use crate::state::{lock, AppState, CreateSession, SessionStatus};
use crate::store::Mode;
use crate::stream::stream;
use axum::extract::{Path, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use telewaypoint_core::session::{ExperimentPlan, TrialSpec};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/maps", get(maps))
        .route("/api/sessions", post(create).get(list))
        .route("/api/sessions/{id}", get(status))
        .route("/api/sessions/{id}/trials/next", post(next_trial))
        .route("/api/sessions/{id}/bonus", post(bonus))
        .route("/api/sessions/{id}/questionnaires", post(questionnaire))
        .route("/api/sessions/{id}/results.csv", get(results_csv))
        .route("/api/sessions/{id}/events.log", get(events))
        .route("/api/sessions/{id}/export", get(export_one))
        .route("/api/sessions/{id}/stream", get(stream))
        .route("/api/export", get(export_all))
        .with_state(state)
}

async fn maps(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "maps": state.map_ids(), "default": state.0.default_map }))
}

#[derive(Serialize)]
struct Created {
    id: String,
    plan: ExperimentPlan,
}

async fn create(State(state): State<AppState>, Json(req): Json<CreateSession>) -> Result<Json<Created>, ApiError> {
    let id = match req.mode {
        Mode::Interactive => lock(&state.create(&req)?).meta.id.clone(),
        Mode::Bot => {
            let st = state.clone();
            tokio::task::spawn_blocking(move || create_bot_session(&st, &req))
                .await
                .map_err(|e| ApiError::BadRequest(e.to_string()))??
        }
    };
    let plan = lock(&state.get(&id)?).session.plan.clone();
    Ok(Json(Created { id, plan }))
}

async fn list(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.ids())
}

async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionStatus>, ApiError> {
    Ok(Json(lock(&state.get(&id)?).status()))
}

#[derive(Serialize)]
struct Started {
    trial: usize,
    spec: TrialSpec,
}

async fn next_trial(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Started>, ApiError> {
    let entry = state.get(&id)?;
    let mut e = lock(&entry);
    if e.session.is_finished() && !e.session.is_trial_running() {
        return Err(ApiError::SessionComplete);
    }
    let trial = e.session.start_next_trial()?;
    e.persist(state.store())?;
    Ok(Json(Started { trial, spec: e.session.plan.trials[trial] }))
}

async fn bonus(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let entry = state.get(&id)?;
    let mut e = lock(&entry);
    let added = e.session.add_bonus();
    e.persist(state.store())?;
    Ok(Json(json!({ "added": added, "trials": e.session.plan.trials.len() })))
}

#[derive(Deserialize)]
struct Questionnaire {
    trial: usize,
    instrument: String,
    items: Vec<i64>,
}

async fn questionnaire(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(q): Json<Questionnaire>,
) -> Result<Json<Value>, ApiError> {
    let entry = state.get(&id)?;
    let score = lock(&entry).submit_questionnaire(state.store(), q.trial, &q.instrument, &q.items)?;
    Ok(Json(json!({ "trial": q.trial, "instrument": q.instrument, "score": score })))
}

async fn results_csv(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let csv = lock(&state.get(&id)?).session.results_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}

async fn events(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let log = lock(&state.get(&id)?).session.log().to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], log))
}

fn csvs(state: &AppState, ids: &[String]) -> Result<(Vec<String>, Vec<String>), ApiError> {
    let mut results = vec![];
    let mut questionnaires = vec![];
    for id in ids {
        let entry = state.get(id)?;
        let e = lock(&entry);
        if e.session.results().is_empty() {
            continue;
        }
        results.push(e.session.results_csv());
        questionnaires.push(telewaypoint_stats::report::questionnaires_csv(&e.questionnaires));
    }
    Ok((results, questionnaires))
}

async fn export_one(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ExportBundle>, ApiError> {
    let (r, q) = csvs(&state, &[id])?;
    let mut bundle = combine(&r, &q)?;
    // a single participant never supports the between-group analysis
    bundle.report_csv = None;
    bundle.report_error = Some("per-session export carries no analysis".into());
    Ok(Json(bundle))
}

async fn export_all(State(state): State<AppState>) -> Result<Json<ExportBundle>, ApiError> {
    let (r, q) = csvs(&state, &state.ids())?;
    Ok(Json(combine(&r, &q)?))
}
