//! Line-delimited JSON protocol between an operator client and a session.

use crate::geometry::{Point2D, Pose2D};
use crate::planner::PlanError;
use crate::selection::{ControllerPose, SelectionState};
use crate::sim::DriveInput;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMethod {
    Direct,
    Waypoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

/// One operator action. Timestamps are assigned by the session on receipt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireCommand {
    Drive(DriveInput),
    AimBegin,
    AimUpdate(ControllerPose),
    AimRelease,
    Confirm,
    StopGrip,
    SwitchMethod { method: ControlMethod },
    StimulusResponse { button: Direction },
}

impl WireCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            WireCommand::Drive(_) => "drive",
            WireCommand::AimBegin => "aim_begin",
            WireCommand::AimUpdate(_) => "aim_update",
            WireCommand::AimRelease => "aim_release",
            WireCommand::Confirm => "confirm",
            WireCommand::StopGrip => "stop_grip",
            WireCommand::SwitchMethod { .. } => "switch_method",
            WireCommand::StimulusResponse { .. } => "stimulus_response",
        }
    }

    /// Commands handled by the operator station itself rather than sent over the uplink.
    pub fn is_operator_local(&self) -> bool {
        matches!(self, WireCommand::StimulusResponse { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialPhase {
    Running,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveStimulus {
    pub id: usize,
    pub direction: Direction,
    pub spawn_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseAck {
    pub stimulus: usize,
    pub correct: bool,
    pub response_time: f64,
}

/// Robot-side snapshot; this is what travels over the downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFrame {
    pub tick: u64,
    /// Seconds since trial start.
    pub t: f64,
    pub pose: Pose2D,
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub proximity_warning: bool,
    pub selection: SelectionState,
    /// Target the robot is currently driving to, if any.
    pub nav_target: Option<Point2D>,
    pub path: Vec<Point2D>,
    pub active_method: ControlMethod,
    pub phase: TrialPhase,
    pub plan_error: Option<PlanError>,
}

/// What the operator sees: a downlink-delivered robot snapshot plus
/// operator-station overlays that are never delayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub trial: usize,
    #[serde(flatten)]
    pub robot: RobotFrame,
    pub stimuli: Vec<ActiveStimulus>,
    pub last_response: Option<ResponseAck>,
    /// Seconds since trial start at which the mid-trial delay was imposed.
    pub delay_onset: Option<f64>,
    #[serde(default)]
    pub scores_due: Vec<String>,
}
