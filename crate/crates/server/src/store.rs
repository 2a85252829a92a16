//! On-disk layout: `<data-dir>/sessions/<id>/{plan.json, events.log, results.csv, questionnaires.csv}`.

use serde::{Deserialize, Serialize};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use telewaypoint_core::session::{ExperimentPlan, SessionConfig};

pub const PLAN_FILE: &str = "plan.json";
pub const EVENTS_FILE: &str = "events.log";
pub const RESULTS_FILE: &str = "results.csv";
pub const QUESTIONNAIRES_FILE: &str = "questionnaires.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Interactive,
    Bot,
}

/// Everything needed to rebuild a session from its event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub map: String,
    pub mode: Mode,
    pub config: SessionConfig,
    /// The plan as created, before any bonus round was added.
    pub plan: ExperimentPlan,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { root: data_dir.into() }
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.sessions_dir().join(id)
    }

    pub fn create(&self, meta: &SessionMeta) -> io::Result<()> {
        let dir = self.session_dir(&meta.id);
        fs::create_dir_all(&dir)?;
        let json = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
        write_atomic(&dir.join(PLAN_FILE), &json)?;
        fs::File::create(dir.join(EVENTS_FILE))?;
        Ok(())
    }

    /// Appends one batch of JSONL records with a single write.
    pub fn append_events(&self, id: &str, batch: &str) -> io::Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new().append(true).create(true).open(self.session_dir(id).join(EVENTS_FILE))?;
        f.write_all(batch.as_bytes())
    }

    pub fn write(&self, id: &str, file: &str, contents: &str) -> io::Result<()> {
        write_atomic(&self.session_dir(id).join(file), contents)
    }

    pub fn read(&self, id: &str, file: &str) -> io::Result<String> {
        fs::read_to_string(self.session_dir(id).join(file))
    }

    pub fn read_meta(&self, id: &str) -> io::Result<SessionMeta> {
        serde_json::from_str(&self.read(id, PLAN_FILE)?).map_err(io::Error::other)
    }

    /// Session ids on disk, sorted.
    pub fn list(&self) -> io::Result<Vec<String>> {
        let dir = self.sessions_dir();
        if !dir.exists() {
            return Ok(vec![]);
        }
        let mut ids = vec![];
        for e in fs::read_dir(dir)? {
            let e = e?;
            if e.file_type()?.is_dir() && e.path().join(PLAN_FILE).exists() {
                ids.push(e.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}
