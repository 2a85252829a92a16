//! Counterbalanced trial sequence for one participant.

use crate::map::MapVariant;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    DCFirst,
    WCFirst,
}

impl Order {
    pub fn label(self) -> &'static str {
        match self {
            Order::DCFirst => "DCFirst",
            Order::WCFirst => "WCFirst",
        }
    }

    pub fn parse(s: &str) -> Option<Order> {
        match s {
            "DCFirst" => Some(Order::DCFirst),
            "WCFirst" => Some(Order::WCFirst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlMode {
    Direct,
    Waypoint,
    Switchable,
}

impl ControlMode {
    pub fn label(self) -> &'static str {
        match self {
            ControlMode::Direct => "Direct",
            ControlMode::Waypoint => "Waypoint",
            ControlMode::Switchable => "Switchable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub control: ControlMode,
    /// Nominal communication delay in seconds.
    pub delay: f64,
    pub map_variant: MapVariant,
    pub bonus: bool,
}

impl TrialSpec {
    pub fn bonus() -> Self {
        Self {
            control: ControlMode::Switchable,
            delay: 0.0,
            map_variant: MapVariant::Bonus,
            bonus: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub participant_id: String,
    pub order: Order,
    pub trials: Vec<TrialSpec>,
    pub rng_seed: u64,
}

impl ExperimentPlan {
    pub fn has_bonus(&self) -> bool {
        self.trials.iter().any(|t| t.bonus)
    }

    /// Appends the optional bonus round; no-op when already present.
    pub fn add_bonus(&mut self) {
        if !self.has_bonus() {
            self.trials.push(TrialSpec::bonus());
        }
    }

    /// Seed for the stimulus schedule of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        // splitmix64 step keeps per-trial streams decorrelated
        let mut z = self
            .rng_seed
            .wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Four trials: each method runs undelayed then delayed, in the order's method
/// sequence, over the forward, reverse, forward-mirrored and reverse-mirrored maps.
pub fn build_plan(participant_id: impl Into<String>, order: Order, seed: u64) -> ExperimentPlan {
    let (first, second) = match order {
        Order::DCFirst => (ControlMode::Direct, ControlMode::Waypoint),
        Order::WCFirst => (ControlMode::Waypoint, ControlMode::Direct),
    };
    let variants = [
        MapVariant::Forward,
        MapVariant::Reverse,
        MapVariant::ForwardMirrored,
        MapVariant::ReverseMirrored,
    ];
    let controls = [first, first, second, second];
    let delays = [0.0, 1.0, 0.0, 1.0];
    let trials = (0..4)
        .map(|i| TrialSpec {
            control: controls[i],
            delay: delays[i],
            map_variant: variants[i],
            bonus: false,
        })
        .collect();
    ExperimentPlan {
        participant_id: participant_id.into(),
        order,
        trials,
        rng_seed: seed,
    }
}
