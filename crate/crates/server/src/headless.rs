//! In-process bots that talk to sessions through the wire encoding, the bot
//! experiment runner and export of stored sessions.

use crate::error::ApiError;
use crate::protocol::over_wire;
use crate::state::{lock, AppState, CreateSession};
use crate::store::{Mode, Store, QUESTIONNAIRES_FILE, RESULTS_FILE};
use serde::Serialize;
use std::fmt::Write as _;
use telewaypoint_core::bots::{Bot, BotConfig, BotKind, BOT_TICK_LIMIT};
use telewaypoint_core::map::OccupancyGrid;
use telewaypoint_core::session::{ControlMode, Session, SessionConfig, SessionError};
use telewaypoint_stats::report::analyze;

fn kind_for(control: ControlMode) -> BotKind {
    match control {
        ControlMode::Direct => BotKind::DirectBot,
        ControlMode::Waypoint | ControlMode::Switchable => BotKind::WaypointBot,
    }
}

/// Runs the current trial with `bot`, sending every command through the wire encoding.
pub fn run_trial_over_wire(session: &mut Session, bot: &mut Bot) -> Result<(), ApiError> {
    for _ in 0..BOT_TICK_LIMIT {
        if !session.is_trial_running() {
            return Ok(());
        }
        for cmd in bot.act(session) {
            match session.submit(over_wire(&cmd)?) {
                Ok(_) | Err(SessionError::AlreadyAnswered) | Err(SessionError::NoActiveStimulus) => {}
                Err(e) => return Err(e.into()),
            }
        }
        session.tick()?;
    }
    Err(ApiError::BadRequest(format!("bot did not finish within {BOT_TICK_LIMIT} ticks")))
}

/// Plays every remaining trial of a session with bots.
pub fn run_bot_session_over_wire(session: &mut Session, seed: u64) -> Result<(), ApiError> {
    while !session.is_finished() {
        let index = session.start_next_trial()?;
        let kind = kind_for(session.plan.trials[index].control);
        let mut bot = Bot::new(BotConfig::new(kind), session, seed.wrapping_add(index as u64))
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        run_trial_over_wire(session, &mut bot)?;
    }
    Ok(())
}

/// Creates a bot-mode session, plays it to the end and persists it.
pub fn create_bot_session(state: &AppState, req: &CreateSession) -> Result<String, ApiError> {
    let req = CreateSession { mode: Mode::Bot, ..req.clone() };
    let entry = state.create(&req)?;
    let mut e = lock(&entry);
    let seed = req.seed;
    let result = run_bot_session_over_wire(&mut e.session, seed);
    e.persist(state.store())?;
    result?;
    Ok(e.meta.id.clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub runs: usize,
    pub direct_ratio: f64,
    pub waypoint_ratio: f64,
    pub paired_wins: usize,
}

/// Paired bot runs: for each seed, both bots with and without delay on the same map variant.
/// Returns the combined results CSV and the delay ratios.
pub fn bot_experiment(
    base: &OccupancyGrid,
    config: SessionConfig,
    first_seed: u64,
    runs: usize,
) -> Result<(String, ExperimentSummary), ApiError> {
    let mut parts = vec![];
    let mut ratios = vec![];
    for seed in first_seed..first_seed + runs as u64 {
        let mut times = [[0.0; 2]; 2];
        for (k, kind) in [BotKind::DirectBot, BotKind::WaypointBot].into_iter().enumerate() {
            for (d, delay) in [0.0, 1.0].into_iter().enumerate() {
                let s = telewaypoint_core::bots::run_single(kind, delay, seed, base, config)
                    .map_err(|e| ApiError::BadRequest(e.to_string()))?;
                times[k][d] = s.results()[0].completion_time;
                parts.push(s.results_csv());
            }
        }
        ratios.push((times[0][1] / times[0][0], times[1][1] / times[1][0]));
    }
    let n = ratios.len().max(1) as f64;
    let summary = ExperimentSummary {
        runs,
        direct_ratio: ratios.iter().map(|r| r.0).sum::<f64>() / n,
        waypoint_ratio: ratios.iter().map(|r| r.1).sum::<f64>() / n,
        paired_wins: ratios.iter().filter(|r| r.0 > r.1).count(),
    };
    Ok((concat_csv(&parts), summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportBundle {
    pub results_csv: String,
    pub questionnaires_csv: String,
    /// Absent when the sessions cannot support the analysis.
    pub report_csv: Option<String>,
    pub report_error: Option<String>,
}

/// Concatenates per-session CSVs (one header each) and runs the analysis.
pub fn combine(results: &[String], questionnaires: &[String]) -> Result<ExportBundle, ApiError> {
    let results_csv = concat_csv(results);
    if results_csv.lines().count() < 2 {
        return Err(ApiError::InsufficientData("no completed trials".into()));
    }
    let questionnaires_csv = concat_csv(questionnaires);
    let (report_csv, report_error) = match analyze(&results_csv, &questionnaires_csv) {
        Ok(r) => (Some(r.to_csv()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ExportBundle { results_csv, questionnaires_csv, report_csv, report_error })
}

fn concat_csv(parts: &[String]) -> String {
    let mut out = String::new();
    for p in parts {
        let mut lines = p.lines();
        let Some(header) = lines.next() else { continue };
        if out.is_empty() {
            writeln!(out, "{header}").ok();
        }
        for l in lines {
            writeln!(out, "{l}").ok();
        }
    }
    out
}

/// Reads every stored session's CSVs.
pub fn export_store(store: &Store) -> Result<ExportBundle, ApiError> {
    let mut results = vec![];
    let mut questionnaires = vec![];
    for id in store.list()? {
        if let Ok(r) = store.read(&id, RESULTS_FILE) {
            results.push(r);
        }
        if let Ok(q) = store.read(&id, QUESTIONNAIRES_FILE) {
            questionnaires.push(q);
        }
    }
    combine(&results, &questionnaires)
}
