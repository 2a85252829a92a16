//! Per-trial measures and the results CSV.

use super::plan::{ControlMode, ExperimentPlan, TrialSpec};
use super::stimuli::StimulusEvent;
use crate::wire::ControlMethod;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const RESULTS_HEADER: [&str; 10] = [
    "participant",
    "order",
    "control",
    "delay",
    "completion_time",
    "distance",
    "mean_rt",
    "errors",
    "usage_direct_pct",
    "usage_waypoint_pct",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub spec: TrialSpec,
    pub completion_time: f64,
    pub distance_travelled: f64,
    pub responses: Vec<StimulusEvent>,
    pub errors_count: u32,
    /// Seconds spent under each method; only populated for bonus trials.
    pub usage_seconds: BTreeMap<ControlMethod, f64>,
}

impl TrialResult {
    /// Mean reaction time over answered stimuli.
    pub fn mean_rt(&self) -> Option<f64> {
        let rts: Vec<f64> = self.responses.iter().filter_map(|e| e.reaction()).collect();
        if rts.is_empty() {
            None
        } else {
            Some(rts.iter().sum::<f64>() / rts.len() as f64)
        }
    }

    /// (direct, waypoint) usage percentages.
    pub fn usage_pct(&self) -> (f64, f64) {
        match self.spec.control {
            ControlMode::Direct => (100.0, 0.0),
            ControlMode::Waypoint => (0.0, 100.0),
            ControlMode::Switchable => {
                let d = self.usage_seconds.get(&ControlMethod::Direct).copied().unwrap_or(0.0);
                let w = self.usage_seconds.get(&ControlMethod::Waypoint).copied().unwrap_or(0.0);
                if d + w == 0.0 {
                    return (0.0, 0.0);
                }
                let direct = 100.0 * d / (d + w);
                (direct, 100.0 - direct)
            }
        }
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

/// One CSV row per finished trial. An empty `mean_rt` means no stimulus was answered.
pub fn results_csv(plan: &ExperimentPlan, results: &[TrialResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for r in results {
        let (ud, uw) = r.usage_pct();
        w.write_record([
            plan.participant_id.clone(),
            plan.order.label().to_string(),
            r.spec.control.label().to_string(),
            fixed(r.spec.delay),
            fixed(r.completion_time),
            fixed(r.distance_travelled),
            r.mean_rt().map(fixed).unwrap_or_default(),
            r.errors_count.to_string(),
            fixed(ud),
            fixed(uw),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
