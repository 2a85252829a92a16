//! Mixed repeated-measures ANOVA for the 2 (control) × 2 (delay) within ×
//! 2 (order) between design, with simple effects, paired t and cell means.
//!
//! Every within effect in a two-level design reduces to one contrast score per
//! participant. With orthonormal contrasts the classical sums of squares are
//! sums of squares of those scores, which keeps the partition exact.

use crate::dist::{f_sf, t_two_sided};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    DCFirst,
    WCFirst,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::DCFirst, Group::WCFirst];

    pub fn label(self) -> &'static str {
        match self {
            Group::DCFirst => "DCFirst",
            Group::WCFirst => "WCFirst",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        Group::ALL.into_iter().find(|g| g.label() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    Control,
    Delay,
}

pub const CONTROL_LEVELS: [&str; 2] = ["DC", "WC"];
pub const DELAY_LEVELS: [&str; 2] = ["0", "1"];

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum StatsError {
    #[error("unbalanced design: {0}")]
    UnbalancedDesign(String),
    #[error("group {group} has {n} participants, need at least 2")]
    InsufficientSubjects { group: String, n: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite observation for participant {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub group: Group,
    /// `cells[control][delay]`, control 0 = DC, 1 = WC; delay 0 = none, 1 = 1 s.
    pub cells: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmDataset {
    participants: Vec<Participant>,
}

impl RmDataset {
    pub fn new(participants: Vec<Participant>) -> Result<Self, StatsError> {
        for p in &participants {
            if p.cells.iter().flatten().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite(p.id.clone()));
            }
        }
        for g in Group::ALL {
            let n = participants.iter().filter(|p| p.group == g).count();
            if n < 2 {
                return Err(StatsError::InsufficientSubjects { group: g.label().into(), n });
            }
        }
        Ok(Self { participants })
    }

    /// Builds a dataset from long-format rows `(participant, group, control, delay, value)`.
    /// Every participant must have exactly one value per cell and a single group.
    pub fn from_records<'a>(
        rows: impl IntoIterator<Item = (&'a str, Group, usize, usize, f64)>,
    ) -> Result<Self, StatsError> {
        let mut acc: BTreeMap<&str, (Group, [[Option<f64>; 2]; 2])> = BTreeMap::new();
        let mut order = Vec::new();
        for (id, group, c, d, v) in rows {
            if c > 1 || d > 1 {
                return Err(StatsError::UnbalancedDesign(format!("{id}: level out of range")));
            }
            let entry = acc.entry(id).or_insert_with(|| {
                order.push(id);
                (group, [[None; 2]; 2])
            });
            if entry.0 != group {
                return Err(StatsError::UnbalancedDesign(format!("{id}: group changes")));
            }
            if entry.1[c][d].replace(v).is_some() {
                return Err(StatsError::UnbalancedDesign(format!("{id}: duplicate cell")));
            }
        }
        let mut participants = Vec::with_capacity(order.len());
        for id in order {
            let (group, cells) = acc[id];
            let mut full = [[0.0; 2]; 2];
            for c in 0..2 {
                for d in 0..2 {
                    full[c][d] = cells[c][d]
                        .ok_or_else(|| StatsError::UnbalancedDesign(format!("{id}: missing cell")))?;
                }
            }
            participants.push(Participant { id: id.to_string(), group, cells: full });
        }
        Self::new(participants)
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    fn groups(&self) -> Vec<usize> {
        self.participants.iter().map(|p| p.group.index()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Effect {
    Control,
    Delay,
    Order,
    ControlDelay,
    ControlOrder,
    DelayOrder,
    ControlDelayOrder,
}

impl Effect {
    pub const ALL: [Effect; 7] = [
        Effect::Control,
        Effect::Delay,
        Effect::Order,
        Effect::ControlDelay,
        Effect::ControlOrder,
        Effect::DelayOrder,
        Effect::ControlDelayOrder,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Effect::Control => "control",
            Effect::Delay => "delay",
            Effect::Order => "order",
            Effect::ControlDelay => "control*delay",
            Effect::ControlOrder => "control*order",
            Effect::DelayOrder => "delay*order",
            Effect::ControlDelayOrder => "control*delay*order",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    pub ss: f64,
    pub ss_error: f64,
    pub df_num: u32,
    pub df_den: u32,
    pub f: f64,
    pub p: f64,
}

impl FTest {
    fn new(ss: f64, df_num: u32, ss_error: f64, df_den: u32) -> Self {
        let (f, p) = if ss_error > 0.0 {
            let f = (ss / df_num as f64) / (ss_error / df_den as f64);
            (f, f_sf(f, df_num as f64, df_den as f64))
        } else if ss > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            // 0/0: no variance at all
            (0.0, 1.0)
        };
        Self { ss, ss_error, df_num, df_den, f, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub effect: Effect,
    pub test: FTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    /// Σ (y − ȳ)² over all observations.
    pub ss_total: f64,
    /// Participants within groups (the between-subject error).
    pub ss_subjects: f64,
}

impl AnovaTable {
    pub fn get(&self, effect: Effect) -> &FTest {
        &self.rows.iter().find(|r| r.effect == effect).expect("every effect present").test
    }

    /// Sum of every effect and error term. Equals `ss_total` up to rounding.
    pub fn ss_partition(&self) -> f64 {
        let mut sum = self.ss_subjects;
        for r in &self.rows {
            sum += r.test.ss;
            if matches!(r.effect, Effect::Control | Effect::Delay | Effect::ControlDelay) {
                sum += r.test.ss_error;
            }
        }
        sum
    }
}

/// Mean, between-group and within-group sums of squares of one score per participant.
struct Split {
    mean: f64,
    between: f64,
    within: f64,
}

fn split(scores: &[f64], groups: &[usize]) -> Split {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&s, &g) in scores.iter().zip(groups) {
        sums[g] += s;
        counts[g] += 1;
    }
    let gm = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let between = (0..2).map(|g| counts[g] as f64 * (gm[g] - mean).powi(2)).sum();
    let within = scores.iter().zip(groups).map(|(&s, &g)| (s - gm[g]).powi(2)).sum();
    Split { mean, between, within }
}

/// Orthonormal contrast of the four cells: (mean, control, delay, interaction).
fn contrasts(c: &[[f64; 2]; 2]) -> [f64; 4] {
    let [[a, b], [x, y]] = *c;
    [
        (a + b + x + y) / 2.0,
        (a + b - x - y) / 2.0,
        (a - b + x - y) / 2.0,
        (a - b - x + y) / 2.0,
    ]
}

/// Classical sums-of-squares decomposition. Within effects are tested against
/// effect × participant-within-group, order against participant-within-group;
/// all denominators have N − 2 degrees of freedom.
pub fn mixed_anova(data: &RmDataset) -> AnovaTable {
    let groups = data.groups();
    let n = data.len();
    let df_err = (n - 2) as u32;
    let scores: Vec<[f64; 4]> = data.participants.iter().map(|p| contrasts(&p.cells)).collect();
    let column = |k: usize| scores.iter().map(|s| s[k]).collect::<Vec<_>>();

    let total = split(&column(0), &groups);
    let mut rows = vec![];
    let within = |main: Effect, inter: Effect, k: usize, rows: &mut Vec<AnovaRow>| {
        let s = split(&column(k), &groups);
        let ss = n as f64 * s.mean * s.mean;
        rows.push(AnovaRow { effect: main, test: FTest::new(ss, 1, s.within, df_err) });
        rows.push(AnovaRow { effect: inter, test: FTest::new(s.between, 1, s.within, df_err) });
    };
    within(Effect::Control, Effect::ControlOrder, 1, &mut rows);
    within(Effect::Delay, Effect::DelayOrder, 2, &mut rows);
    within(Effect::ControlDelay, Effect::ControlDelayOrder, 3, &mut rows);
    rows.push(AnovaRow { effect: Effect::Order, test: FTest::new(total.between, 1, total.within, df_err) });
    rows.sort_by_key(|r| Effect::ALL.iter().position(|e| *e == r.effect));

    let all: Vec<f64> = data.participants.iter().flat_map(|p| p.cells.into_iter().flatten()).collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let ss_total = all.iter().map(|v| (v - grand).powi(2)).sum();
    AnovaTable { rows, ss_total, ss_subjects: total.within }
}

/// Effect of the other factor at one level of `fixed`, with the error term
/// taken from that slice (participant-within-group by factor).
pub fn simple_effect(data: &RmDataset, fixed: Factor, level: usize) -> FTest {
    assert!(level < 2, "two-level factors");
    let groups = data.groups();
    let diffs: Vec<f64> = data
        .participants
        .iter()
        .map(|p| {
            let (a, b) = match fixed {
                Factor::Delay => (p.cells[0][level], p.cells[1][level]),
                Factor::Control => (p.cells[level][0], p.cells[level][1]),
            };
            (a - b) / std::f64::consts::SQRT_2
        })
        .collect();
    let s = split(&diffs, &groups);
    FTest::new(data.len() as f64 * s.mean * s.mean, 1, s.within, (data.len() - 2) as u32)
}

/// One-way repeated-measures ANOVA; `levels[j][i]` is participant i under level j.
pub fn rm_anova_oneway(levels: &[Vec<f64>]) -> Result<FTest, StatsError> {
    let k = levels.len();
    if k < 2 {
        return Err(StatsError::UnbalancedDesign("need two levels".into()));
    }
    let n = levels[0].len();
    if let Some(l) = levels.iter().find(|l| l.len() != n) {
        return Err(StatsError::LengthMismatch(n, l.len()));
    }
    if n < 2 {
        return Err(StatsError::InsufficientSubjects { group: "all".into(), n });
    }
    let grand = levels.iter().flatten().sum::<f64>() / (n * k) as f64;
    let level_means: Vec<f64> = levels.iter().map(|l| l.iter().sum::<f64>() / n as f64).collect();
    let subject_means: Vec<f64> =
        (0..n).map(|i| levels.iter().map(|l| l[i]).sum::<f64>() / k as f64).collect();
    let ss = n as f64 * level_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    for (j, l) in levels.iter().enumerate() {
        for (i, v) in l.iter().enumerate() {
            ss_err += (v - level_means[j] - subject_means[i] + grand).powi(2);
        }
    }
    Ok(FTest::new(ss, (k - 1) as u32, ss_err, ((k - 1) * (n - 1)) as u32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    pub df: u32,
    pub p: f64,
    pub mean_diff: f64,
    /// All differences equal: t is 0 or infinite and p is 0 or 1.
    pub degenerate: bool,
}

/// Paired-samples t test on x − y, two-sided.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<PairedT, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::InsufficientSubjects { group: "pairs".into(), n });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let df = (n - 1) as u32;
    let mean = d.iter().sum::<f64>() / n as f64;
    if d.iter().all(|v| *v == d[0]) {
        let (t, p) = if d[0] == 0.0 { (0.0, 1.0) } else { (f64::INFINITY.copysign(d[0]), 0.0) };
        return Ok(PairedT { t, df, p, mean_diff: mean, degenerate: true });
    }
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / df as f64;
    let t = mean / (var / n as f64).sqrt();
    Ok(PairedT { t, df, p: t_two_sided(t, df as f64), mean_diff: mean, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    /// Sample standard deviation; 0 when n = 1.
    pub sd: f64,
    pub n: usize,
}

pub fn describe(values: &[f64]) -> DescriptiveStats {
    let n = values.len();
    assert!(n >= 1, "describe needs at least one value");
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    DescriptiveStats { mean, sd, n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    /// None for the pooled sample.
    pub group: Option<Group>,
    pub control: usize,
    pub delay: usize,
    pub stats: DescriptiveStats,
}

/// Per-cell mean and SD, pooled or per order group. Groups with no
/// participants are omitted.
pub fn marginal_means(participants: &[Participant], split_by_group: bool) -> Vec<CellStats> {
    let groups: Vec<Option<Group>> =
        if split_by_group { Group::ALL.into_iter().map(Some).collect() } else { vec![None] };
    let mut out = vec![];
    for g in groups {
        let members: Vec<&Participant> =
            participants.iter().filter(|p| g.map_or(true, |x| x == p.group)).collect();
        if members.is_empty() {
            continue;
        }
        for control in 0..2 {
            for delay in 0..2 {
                let vals: Vec<f64> = members.iter().map(|p| p.cells[control][delay]).collect();
                out.push(CellStats { group: g, control, delay, stats: describe(&vals) });
            }
        }
    }
    out
}
