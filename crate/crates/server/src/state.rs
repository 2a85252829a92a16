//! Live sessions shared between the REST handlers and the stream loops.

use crate::error::ApiError;
use crate::store::{Mode, SessionMeta, Store, QUESTIONNAIRES_FILE, RESULTS_FILE};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::io;
use std::sync::{Arc, Mutex, MutexGuard};
use telewaypoint_core::channel::ChannelConfig;
use telewaypoint_core::map::{trial_forward, OccupancyGrid};
use telewaypoint_core::session::{
    build_plan, log::kind, replay, TrialResult, EventLog, ExperimentPlan, Order, Session,
    SessionConfig, INSTRUMENTS,
};
use telewaypoint_stats::report::{questionnaires_csv, QuestionnaireRecord};
use telewaypoint_stats::{sus_score, tlx_raw, SusResponse, TlxResponse};

pub const SHIPPED_MAP: &str = "trial_forward";

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub map: Option<String>,
    pub order: String,
    pub seed: u64,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionStatus {
    pub id: String,
    pub map: String,
    pub mode: Mode,
    pub plan: ExperimentPlan,
    pub next_trial: usize,
    pub running_trial: Option<usize>,
    pub finished: bool,
    pub streaming: bool,
    pub results: Vec<TrialResult>,
    pub questionnaires: Vec<QuestionnaireRecord>,
}

pub struct Entry {
    pub meta: SessionMeta,
    pub session: Session,
    pub questionnaires: Vec<QuestionnaireRecord>,
    pub streaming: bool,
    results_written: usize,
}

impl Entry {
    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            id: self.meta.id.clone(),
            map: self.meta.map.clone(),
            mode: self.meta.mode,
            plan: self.session.plan.clone(),
            next_trial: self.session.next_trial_index(),
            running_trial: self.session.is_trial_running().then(|| self.session.trial().map(|t| t.index)).flatten(),
            finished: self.session.is_finished() && !self.session.is_trial_running(),
            streaming: self.streaming,
            results: self.session.results().to_vec(),
            questionnaires: self.questionnaires.clone(),
        }
    }

    /// Writes new log records as one batch and refreshes the results file.
    pub fn persist(&mut self, store: &Store) -> io::Result<()> {
        let batch = self.session.log_mut().drain_new();
        store.append_events(&self.meta.id, &batch)?;
        if self.session.results().len() != self.results_written {
            store.write(&self.meta.id, RESULTS_FILE, &self.session.results_csv())?;
            self.results_written = self.session.results().len();
        }
        Ok(())
    }

    pub fn submit_questionnaire(
        &mut self,
        store: &Store,
        trial: usize,
        instrument: &str,
        items: &[i64],
    ) -> Result<f64, ApiError> {
        if !INSTRUMENTS.contains(&instrument) {
            return Err(ApiError::BadRequest(format!("instrument {instrument:?}")));
        }
        if !self.session.results().iter().any(|r| r.trial == trial) {
            return Err(ApiError::TrialIncomplete(trial));
        }
        if self.questionnaires.iter().any(|q| q.trial == trial && q.instrument == instrument) {
            return Err(ApiError::DuplicateSubmission { trial, instrument: instrument.into() });
        }
        let score = match instrument {
            "SUS" => sus_score(&SusResponse::new(items).map_err(ApiError::OutOfRangeItem)?),
            _ => tlx_raw(&TlxResponse::new(items).map_err(ApiError::OutOfRangeItem)?),
        };
        let record = QuestionnaireRecord::new(&self.session.plan.participant_id, trial, instrument, items, score);
        self.session.annotate(
            kind::QUESTIONNAIRE,
            json!({ "trial": trial, "instrument": instrument, "items": items, "score": score }),
        );
        self.questionnaires.push(record);
        store.write(&self.meta.id, QUESTIONNAIRES_FILE, &questionnaires_csv(&self.questionnaires))?;
        self.persist(store)?;
        Ok(score)
    }
}

pub type SharedEntry = Arc<Mutex<Entry>>;

pub struct Shared {
    pub maps: BTreeMap<String, OccupancyGrid>,
    pub default_map: String,
    /// Overrides the delayed-trial link of every new session.
    pub delayed_link: Option<ChannelConfig>,
    pub store: Store,
    sessions: Mutex<BTreeMap<String, SharedEntry>>,
    next_id: Mutex<u64>,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Shared>);

pub fn lock(entry: &SharedEntry) -> MutexGuard<'_, Entry> {
    entry.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    /// `extra_map` is registered under its name and becomes the default.
    pub fn new(store: Store, extra_map: Option<(String, OccupancyGrid)>, delayed_link: Option<ChannelConfig>) -> Self {
        let mut maps = BTreeMap::new();
        maps.insert(SHIPPED_MAP.to_string(), trial_forward());
        let mut default_map = SHIPPED_MAP.to_string();
        if let Some((name, grid)) = extra_map {
            default_map = name.clone();
            maps.insert(name, grid);
        }
        Self(Arc::new(Shared {
            maps,
            default_map,
            delayed_link,
            store,
            sessions: Mutex::new(BTreeMap::new()),
            next_id: Mutex::new(1),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.0.store
    }

    pub fn map_ids(&self) -> Vec<String> {
        self.0.maps.keys().cloned().collect()
    }

    fn sessions(&self) -> MutexGuard<'_, BTreeMap<String, SharedEntry>> {
        self.0.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions().keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<SharedEntry, ApiError> {
        self.sessions().get(id).cloned().ok_or_else(|| ApiError::UnknownSession(id.into()))
    }

    fn config_for(&self, grid: &OccupancyGrid) -> SessionConfig {
        let mut config = SessionConfig::for_map(grid);
        if let Some(link) = self.0.delayed_link {
            config.delayed_link = link;
        }
        config
    }

    pub fn create(&self, req: &CreateSession) -> Result<SharedEntry, ApiError> {
        let map = req.map.clone().unwrap_or_else(|| self.0.default_map.clone());
        let grid = self.0.maps.get(&map).ok_or_else(|| ApiError::UnknownMap(map.clone()))?;
        let order = Order::parse(&req.order).ok_or_else(|| ApiError::BadOrder(req.order.clone()))?;
        let id = {
            let mut n = self.0.next_id.lock().unwrap_or_else(|p| p.into_inner());
            let id = format!("s{:04}", *n);
            *n += 1;
            id
        };
        let participant = req.participant.clone().unwrap_or_else(|| id.clone());
        let meta = SessionMeta {
            id: id.clone(),
            map,
            mode: req.mode,
            config: self.config_for(grid),
            plan: build_plan(participant, order, req.seed),
        };
        self.0.store.create(&meta)?;
        let session = Session::new(meta.plan.clone(), grid.clone(), meta.config);
        let entry = Arc::new(Mutex::new(Entry {
            meta,
            session,
            questionnaires: vec![],
            streaming: false,
            results_written: 0,
        }));
        self.sessions().insert(id, entry.clone());
        Ok(entry)
    }

    /// Rebuilds every session on disk by replaying its event log.
    /// Returns the ids that could not be restored, with the reason.
    pub fn load_existing(&self) -> io::Result<Vec<(String, String)>> {
        let mut failed = vec![];
        let mut max_id = 0;
        for id in self.0.store.list()? {
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            match self.restore(&id) {
                Ok(entry) => {
                    self.sessions().insert(id, Arc::new(Mutex::new(entry)));
                }
                Err(e) => failed.push((id, e)),
            }
        }
        let mut n = self.0.next_id.lock().unwrap_or_else(|p| p.into_inner());
        *n = (*n).max(max_id + 1);
        Ok(failed)
    }

    fn restore(&self, id: &str) -> Result<Entry, String> {
        let store = &self.0.store;
        let meta = store.read_meta(id).map_err(|e| e.to_string())?;
        let grid = self.0.maps.get(&meta.map).ok_or_else(|| format!("unknown map {}", meta.map))?;
        let text = store.read(id, crate::store::EVENTS_FILE).map_err(|e| e.to_string())?;
        let log = EventLog::parse(&text).map_err(|e| e.to_string())?;
        let mut session =
            replay(meta.plan.clone(), grid.clone(), meta.config, &log).map_err(|e| e.to_string())?;
        session.log_mut().drain_new();
        let questionnaires = session
            .log()
            .records()
            .iter()
            .filter(|r| r.kind == kind::QUESTIONNAIRE)
            .filter_map(|r| {
                let items: Vec<i64> = serde_json::from_value(r.data.get("items")?.clone()).ok()?;
                Some(QuestionnaireRecord::new(
                    &session.plan.participant_id,
                    r.data.get("trial")?.as_u64()? as usize,
                    r.data.get("instrument")?.as_str()?,
                    &items,
                    r.data.get("score")?.as_f64()?,
                ))
            })
            .collect();
        let results_written = session.results().len();
        Ok(Entry { meta, session, questionnaires, streaming: false, results_written })
    }
}
