//! From results and questionnaire CSVs to the analysis report CSV.
//!
//! Results rows are matched to questionnaires by their position within a
//! participant: the n-th row of a participant is trial n.

use crate::anova::{
    marginal_means, mixed_anova, paired_t, simple_effect, AnovaTable, CellStats, FTest, Factor,
    Group, PairedT, Participant, RmDataset, StatsError, CONTROL_LEVELS, DELAY_LEVELS,
};
use crate::scoring::TLX_SCALES;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const QUESTIONNAIRE_HEADER: [&str; 5] = ["participant", "trial", "instrument", "items", "score"];

pub const REPORT_HEADER: [&str; 14] = [
    "section", "measure", "effect", "group", "control", "delay", "df_num", "df_den", "F", "t", "p",
    "M", "sd", "n",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("insufficient data: {0}")]
    InsufficientData(StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub participant: String,
    pub order: String,
    pub control: String,
    pub delay: f64,
    pub completion_time: f64,
    pub distance: f64,
    pub mean_rt: Option<f64>,
    pub errors: u32,
    pub usage_direct_pct: f64,
    pub usage_waypoint_pct: f64,
}

/// One submitted questionnaire. `items` holds the raw answers separated by ';'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireRecord {
    pub participant: String,
    pub trial: usize,
    pub instrument: String,
    pub items: String,
    pub score: f64,
}

impl QuestionnaireRecord {
    pub fn new(participant: &str, trial: usize, instrument: &str, items: &[i64], score: f64) -> Self {
        let items = items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        Self { participant: participant.into(), trial, instrument: instrument.into(), items, score }
    }

    pub fn item_values(&self) -> Result<Vec<i64>, std::num::ParseIntError> {
        self.items.split(';').map(str::parse).collect()
    }
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(ReportError::from)).collect()
}

pub fn parse_questionnaires(text: &str) -> Result<Vec<QuestionnaireRecord>, ReportError> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(ReportError::from)).collect()
}

pub fn questionnaires_csv(records: &[QuestionnaireRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(QUESTIONNAIRE_HEADER).expect("in-memory write");
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Measures in report order. TLX components follow the overall scores.
pub fn measure_names() -> Vec<String> {
    let mut m: Vec<String> =
        ["completion_time", "distance", "mean_rt", "errors", "SUS", "TLX"].map(String::from).into();
    m.extend(TLX_SCALES.iter().map(|s| format!("TLX_{s}")));
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleEffectRow {
    pub fixed: Factor,
    pub level: usize,
    pub test: FTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub measure: String,
    pub n: usize,
    pub anova: AnovaTable,
    pub simple: Vec<SimpleEffectRow>,
    pub pooled: Vec<CellStats>,
    pub by_group: Vec<CellStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub measures: Vec<MeasureReport>,
    /// Measures without enough complete participants, with the reason.
    pub skipped: Vec<(String, StatsError)>,
    /// Direct vs waypoint usage share in the bonus round, if at least two participants played it.
    pub bonus_usage: Option<PairedT>,
}

fn cell_of(row: &ResultRow) -> Option<(usize, usize)> {
    let control = match row.control.as_str() {
        "Direct" => 0,
        "Waypoint" => 1,
        _ => return None,
    };
    Some((control, usize::from(row.delay > 0.0)))
}

/// Every measure value keyed by participant, then cell.
type Cells = BTreeMap<String, BTreeMap<(usize, usize), f64>>;

fn collect(
    results: &[ResultRow],
    questionnaires: &[QuestionnaireRecord],
) -> Result<(BTreeMap<String, Cells>, BTreeMap<String, Group>), ReportError> {
    let mut values: BTreeMap<String, Cells> = BTreeMap::new();
    let mut groups = BTreeMap::new();
    let mut trials: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut put = |m: &str, p: &str, cell, v: f64| {
        values.entry(m.into()).or_default().entry(p.into()).or_default().insert(cell, v);
    };
    for (i, row) in results.iter().enumerate() {
        let group = Group::parse(&row.order)
            .ok_or_else(|| ReportError::Malformed { row: i + 1, msg: format!("order {}", row.order) })?;
        if *groups.entry(row.participant.clone()).or_insert(group) != group {
            return Err(ReportError::Malformed { row: i + 1, msg: "order changes".into() });
        }
        let trial = seen.entry(row.participant.clone()).or_insert(0);
        let index = *trial;
        *trial += 1;
        let Some(cell) = cell_of(row) else { continue };
        trials.insert((row.participant.clone(), index), cell);
        put("completion_time", &row.participant, cell, row.completion_time);
        put("distance", &row.participant, cell, row.distance);
        put("errors", &row.participant, cell, row.errors as f64);
        if let Some(rt) = row.mean_rt {
            put("mean_rt", &row.participant, cell, rt);
        }
    }
    for (i, q) in questionnaires.iter().enumerate() {
        let Some(&cell) = trials.get(&(q.participant.clone(), q.trial)) else { continue };
        put(&q.instrument, &q.participant, cell, q.score);
        if q.instrument == "TLX" {
            let items = q
                .item_values()
                .map_err(|e| ReportError::Malformed { row: i + 1, msg: e.to_string() })?;
            for (name, v) in TLX_SCALES.iter().zip(items) {
                put(&format!("TLX_{name}"), &q.participant, cell, v as f64);
            }
        }
    }
    Ok((values, groups))
}

fn dataset(cells: &Cells, groups: &BTreeMap<String, Group>) -> Result<RmDataset, StatsError> {
    let participants = cells
        .iter()
        .filter(|(_, c)| c.len() == 4)
        .map(|(id, c)| Participant {
            id: id.clone(),
            group: groups[id],
            cells: [[c[&(0, 0)], c[&(0, 1)]], [c[&(1, 0)], c[&(1, 1)]]],
        })
        .collect();
    RmDataset::new(participants)
}

fn analyze_dataset(measure: &str, data: &RmDataset) -> MeasureReport {
    let mut simple = vec![];
    for fixed in [Factor::Delay, Factor::Control] {
        for level in 0..2 {
            simple.push(SimpleEffectRow { fixed, level, test: simple_effect(data, fixed, level) });
        }
    }
    MeasureReport {
        measure: measure.into(),
        n: data.len(),
        anova: mixed_anova(data),
        simple,
        pooled: marginal_means(data.participants(), false),
        by_group: marginal_means(data.participants(), true),
    }
}

/// Runs the analysis on every measure. Fails with `InsufficientData` only
/// when completion time itself cannot be analysed.
pub fn analyze(results_csv: &str, questionnaires_csv: &str) -> Result<AnalysisReport, ReportError> {
    let results = parse_results(results_csv)?;
    let questionnaires = parse_questionnaires(questionnaires_csv)?;
    let (values, groups) = collect(&results, &questionnaires)?;
    let mut report = AnalysisReport { measures: vec![], skipped: vec![], bonus_usage: None };
    let empty = Cells::new();
    for m in measure_names() {
        match dataset(values.get(&m).unwrap_or(&empty), &groups) {
            Ok(d) => report.measures.push(analyze_dataset(&m, &d)),
            Err(e) if m == "completion_time" => return Err(ReportError::InsufficientData(e)),
            Err(e) => report.skipped.push((m, e)),
        }
    }
    let bonus: Vec<&ResultRow> = results.iter().filter(|r| r.control == "Switchable").collect();
    if bonus.len() >= 2 {
        let d: Vec<f64> = bonus.iter().map(|r| r.usage_direct_pct).collect();
        let w: Vec<f64> = bonus.iter().map(|r| r.usage_waypoint_pct).collect();
        report.bonus_usage = paired_t(&w, &d).ok();
    }
    Ok(report)
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn prob(v: f64) -> String {
    format!("{v:.10}")
}

impl AnalysisReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).expect("in-memory write");
        let mut row = |cols: [String; 14]| w.write_record(&cols).expect("in-memory write");
        let e = String::new;
        for m in &self.measures {
            for r in &m.anova.rows {
                let t = &r.test;
                row([
                    "anova".into(), m.measure.clone(), r.effect.label().into(), e(), e(), e(),
                    t.df_num.to_string(), t.df_den.to_string(), num(t.f), e(), prob(t.p), e(), e(),
                    m.n.to_string(),
                ]);
            }
            for s in &m.simple {
                let t = &s.test;
                let (effect, control, delay) = match s.fixed {
                    Factor::Delay => ("control", e(), DELAY_LEVELS[s.level].to_string()),
                    Factor::Control => ("delay", CONTROL_LEVELS[s.level].to_string(), e()),
                };
                row([
                    "simple".into(), m.measure.clone(), effect.into(), e(), control, delay,
                    t.df_num.to_string(), t.df_den.to_string(), num(t.f), e(), prob(t.p), e(), e(),
                    m.n.to_string(),
                ]);
            }
            for c in m.pooled.iter().chain(&m.by_group) {
                row([
                    "means".into(), m.measure.clone(), e(),
                    c.group.map_or("all", Group::label).into(),
                    CONTROL_LEVELS[c.control].into(), DELAY_LEVELS[c.delay].into(), e(), e(), e(),
                    e(), e(), num(c.stats.mean), num(c.stats.sd), c.stats.n.to_string(),
                ]);
            }
        }
        if let Some(t) = &self.bonus_usage {
            row([
                "paired".into(), "bonus_usage".into(), "waypoint-direct".into(), e(), e(), e(),
                t.df.to_string(), e(), e(), num(t.t), prob(t.p), num(t.mean_diff), e(),
                (t.df + 1).to_string(),
            ]);
        }
        drop(row);
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}
