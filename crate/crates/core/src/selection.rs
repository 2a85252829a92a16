//! Waypoint target selection: the aim → prospective → confirmed state machine
//! and the ballistic arc that turns a controller pose into a ground point.

use crate::geometry::Point2D;
use crate::planner::Costmap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Tracked controller reduced to its position and aim axis, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerPose {
    pub position: Vec3,
    /// Unit aim direction.
    pub forward: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PoseError {
    #[error("aim direction is not a unit vector")]
    NotUnit,
    #[error("controller is below the ground plane")]
    BelowGround,
    #[error("controller pose has non-finite components")]
    NonFinite,
}

impl ControllerPose {
    pub fn new(position: Vec3, forward: Vec3) -> Result<Self, PoseError> {
        let pose = Self { position, forward };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let parts = [
            self.position.x,
            self.position.y,
            self.position.z,
            self.forward.x,
            self.forward.y,
            self.forward.z,
        ];
        if parts.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        if (self.forward.norm() - 1.0).abs() > 1e-9 {
            return Err(PoseError::NotUnit);
        }
        if self.position.z < 0.0 {
            return Err(PoseError::BelowGround);
        }
        Ok(())
    }

    /// Pose at `position` aiming along `yaw` (about +z) and `pitch` (above horizontal).
    pub fn from_angles(position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        Self {
            position,
            forward: Vec3::new(cp * cy, cp * sy, sp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcConfig {
    pub launch_speed: f64,
    pub gravity: f64,
    pub sample_step: f64,
    pub max_flight: f64,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            launch_speed: 8.0,
            gravity: 9.81,
            sample_step: 0.005,
            max_flight: 3.0,
        }
    }
}

/// Default hand height above the ground plane at the robot position.
pub const HAND_HEIGHT: f64 = 1.2;

const GROUND_TOLERANCE: f64 = 1e-6;

fn arc_point(pose: &ControllerPose, cfg: &ArcConfig, t: f64) -> Vec3 {
    let v = cfg.launch_speed;
    Vec3::new(
        pose.position.x + v * pose.forward.x * t,
        pose.position.y + v * pose.forward.y * t,
        pose.position.z + v * pose.forward.z * t - 0.5 * cfg.gravity * t * t,
    )
}

/// Where the arc first meets the ground, ignoring obstacles.
pub fn arc_ground_hit(pose: &ControllerPose, cfg: &ArcConfig) -> Option<Point2D> {
    if pose.position.z <= 0.0 {
        return Some(Point2D::new(pose.position.x, pose.position.y));
    }
    let steps = (cfg.max_flight / cfg.sample_step).ceil() as usize;
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let t = (k as f64 * cfg.sample_step).min(cfg.max_flight);
        if arc_point(pose, cfg, t).z <= 0.0 {
            let (mut lo, mut hi) = (t_prev, t);
            let mut p = arc_point(pose, cfg, hi);
            for _ in 0..200 {
                if p.z.abs() < GROUND_TOLERANCE {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                p = arc_point(pose, cfg, mid);
                if p.z > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(Point2D::new(p.x, p.y));
        }
        t_prev = t;
    }
    None
}

/// Ground point under the arc, or `None` when the arc does not land within
/// `max_flight` or lands on an occupied/inflated cell.
pub fn arc_project(pose: &ControllerPose, costmap: &Costmap, cfg: &ArcConfig) -> Option<Point2D> {
    arc_ground_hit(pose, cfg).filter(|p| costmap.is_traversable_point(p))
}

/// Horizontal landing distance of the ideal arc at launch `pitch` from `height`.
fn landing_distance(pitch: f64, height: f64, cfg: &ArcConfig) -> f64 {
    let (s, c) = pitch.sin_cos();
    let v = cfg.launch_speed;
    let t = (v * s + ((v * s).powi(2) + 2.0 * cfg.gravity * height).sqrt()) / cfg.gravity;
    v * c * t.min(cfg.max_flight)
}

/// Controller pose at `hand` whose arc lands on `target`, using the flat
/// trajectory below the range-maximising pitch. `None` when out of reach.
pub fn aim_at(hand: Vec3, target: Point2D, cfg: &ArcConfig) -> Option<ControllerPose> {
    let dx = target.x - hand.x;
    let dy = target.y - hand.y;
    let distance = dx.hypot(dy);
    let yaw = dy.atan2(dx);
    let v = cfg.launch_speed;
    let h = hand.z.max(0.0);
    let best = (v / (v * v + 2.0 * cfg.gravity * h).sqrt()).atan();
    if landing_distance(best, h, cfg) < distance {
        return None;
    }
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_2, best);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if landing_distance(mid, h, cfg) < distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(ControllerPose::from_angles(hand, yaw, 0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionMode {
    Idle,
    Aiming,
    Prospective,
    Navigating,
}

/// The selection state; each variant carries exactly the target its mode allows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum SelectionState {
    #[default]
    Idle,
    Aiming { reticle: Option<Point2D> },
    Prospective { target: Point2D },
    Navigating { target: Point2D },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionEvent {
    BeginAim,
    UpdateAim,
    ReleaseAim,
    Confirm,
    Stop,
    Arrive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{event:?} is not allowed while {mode:?}")]
pub struct IllegalTransition {
    pub mode: SelectionMode,
    pub event: SelectionEvent,
}

/// Asks the planner for a route to a confirmed target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationRequest {
    pub target: Point2D,
}

/// Zeroes robot velocity and cancels navigation when delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRequest;

impl SelectionState {
    pub fn mode(&self) -> SelectionMode {
        match self {
            SelectionState::Idle => SelectionMode::Idle,
            SelectionState::Aiming { .. } => SelectionMode::Aiming,
            SelectionState::Prospective { .. } => SelectionMode::Prospective,
            SelectionState::Navigating { .. } => SelectionMode::Navigating,
        }
    }

    pub fn reticle(&self) -> Option<Point2D> {
        match self {
            SelectionState::Aiming { reticle } => *reticle,
            _ => None,
        }
    }

    pub fn prospective_target(&self) -> Option<Point2D> {
        match self {
            SelectionState::Prospective { target } => Some(*target),
            _ => None,
        }
    }

    pub fn confirmed_target(&self) -> Option<Point2D> {
        match self {
            SelectionState::Navigating { target } => Some(*target),
            _ => None,
        }
    }

    fn illegal(&self, event: SelectionEvent) -> IllegalTransition {
        IllegalTransition {
            mode: self.mode(),
            event,
        }
    }

    /// Button pressed. Allowed from Idle, from Prospective (the disk is
    /// discarded) and while Navigating (the robot keeps moving).
    pub fn begin_aim(&self) -> Result<SelectionState, IllegalTransition> {
        match self {
            SelectionState::Aiming { .. } => Err(self.illegal(SelectionEvent::BeginAim)),
            _ => Ok(SelectionState::Aiming { reticle: None }),
        }
    }

    pub fn update_aim(
        &self,
        pose: &ControllerPose,
        costmap: &Costmap,
        arc: &ArcConfig,
    ) -> Result<SelectionState, IllegalTransition> {
        match self {
            SelectionState::Aiming { .. } => Ok(SelectionState::Aiming {
                reticle: arc_project(pose, costmap, arc),
            }),
            _ => Err(self.illegal(SelectionEvent::UpdateAim)),
        }
    }

    pub fn release_aim(&self) -> Result<SelectionState, IllegalTransition> {
        match self {
            SelectionState::Aiming { reticle: Some(p) } => Ok(SelectionState::Prospective { target: *p }),
            SelectionState::Aiming { reticle: None } => Ok(SelectionState::Idle),
            _ => Err(self.illegal(SelectionEvent::ReleaseAim)),
        }
    }

    pub fn confirm(&self) -> Result<(SelectionState, NavigationRequest), IllegalTransition> {
        match self {
            SelectionState::Prospective { target } => Ok((
                SelectionState::Navigating { target: *target },
                NavigationRequest { target: *target },
            )),
            _ => Err(self.illegal(SelectionEvent::Confirm)),
        }
    }

    pub fn stop(&self) -> (SelectionState, StopRequest) {
        (SelectionState::Idle, StopRequest)
    }

    /// The robot reached the confirmed target. No-op outside Navigating.
    pub fn arrive(&self) -> SelectionState {
        match self {
            SelectionState::Navigating { .. } => SelectionState::Idle,
            other => *other,
        }
    }
}
