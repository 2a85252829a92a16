//! Append-only JSONL event log.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub mod kind {
    pub const TRIAL_START: &str = "trial_start";
    pub const COMMAND: &str = "command";
    pub const STIMULUS: &str = "stimulus";
    pub const RESPONSE: &str = "response";
    pub const DELAY_CHANGE: &str = "delay_change";
    pub const METHOD_SWITCH: &str = "method_switch";
    pub const CHECKPOINT: &str = "checkpoint";
    pub const TRIAL_COMPLETE: &str = "trial_complete";
    pub const BONUS_ADDED: &str = "bonus_added";
    pub const QUESTIONNAIRE: &str = "questionnaire";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Session clock in seconds.
    pub t: f64,
    pub kind: String,
    pub data: Value,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: timestamp {t} precedes {prev}")]
    NonMonotonic { line: usize, t: f64, prev: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<EventRecord>,
    /// Number of records already handed out by `drain_new`.
    flushed: usize,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, kind: &str, data: Value) {
        debug_assert!(self.records.last().map_or(true, |r| r.t <= t));
        self.records.push(EventRecord {
            t,
            kind: kind.to_string(),
            data,
        });
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// JSONL for records appended since the previous call.
    pub fn drain_new(&mut self) -> String {
        let out = to_jsonl(&self.records[self.flushed..]);
        self.flushed = self.records.len();
        out
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    pub fn parse(text: &str) -> Result<EventLog, LogError> {
        let mut records: Vec<EventRecord> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EventRecord =
                serde_json::from_str(line).map_err(|source| LogError::Parse { line: i + 1, source })?;
            if let Some(prev) = records.last() {
                if rec.t < prev.t {
                    return Err(LogError::NonMonotonic {
                        line: i + 1,
                        t: rec.t,
                        prev: prev.t,
                    });
                }
            }
            records.push(rec);
        }
        let flushed = records.len();
        Ok(EventLog { records, flushed })
    }
}

fn to_jsonl(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn roundtrip_and_drain() {
        let mut log = EventLog::new();
        log.push(0.0, kind::TRIAL_START, json!({"trial": 0}));
        log.push(0.02, kind::COMMAND, json!({"tick": 1}));
        let first = log.drain_new();
        assert_eq!(first.lines().count(), 2);
        assert!(first.starts_with(r#"{"t":0.0,"kind":"trial_start","data":{"trial":0}}"#));
        log.push(0.04, kind::CHECKPOINT, json!({}));
        assert_eq!(log.drain_new().lines().count(), 1);
        assert_eq!(log.drain_new(), "");
        let back = EventLog::parse(&log.to_jsonl()).unwrap();
        assert_eq!(back.records(), log.records());
    }

    #[test]
    fn rejects_time_travel() {
        let text = "{\"t\":1.0,\"kind\":\"a\",\"data\":{}}\n{\"t\":0.5,\"kind\":\"b\",\"data\":{}}\n";
        assert!(matches!(EventLog::parse(text), Err(LogError::NonMonotonic { line: 2, .. })));
        assert!(matches!(EventLog::parse("{"), Err(LogError::Parse { line: 1, .. })));
    }
}
