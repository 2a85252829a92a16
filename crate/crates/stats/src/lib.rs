//! Scoring of the SUS and Raw-TLX questionnaires, and the repeated-measures
//! analysis used on the collected trial data.

pub mod anova;
pub mod dist;
pub mod report;
pub mod scoring;

pub use anova::{
    marginal_means, mixed_anova, paired_t, rm_anova_oneway, simple_effect, AnovaRow, AnovaTable,
    CellStats, DescriptiveStats, Effect, FTest, Factor, Group, PairedT, Participant, RmDataset,
    StatsError,
};
pub use dist::{f_cdf, f_sf, ln_gamma, reg_inc_beta, t_cdf, t_two_sided};
pub use scoring::{sus_score, tlx_raw, ScoreError, SusResponse, TlxResponse};
