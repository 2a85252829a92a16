//! Deterministic teleoperation simulation for a differential-drive robot under
//! direct (trackpad) control and waypoint supervisory control, with delayed
//! operator/robot links and the experiment engine that sequences trials.

pub mod bots;
pub mod channel;
pub mod geometry;
pub mod map;
pub mod planner;
pub mod selection;
pub mod session;
pub mod sim;
pub mod wire;
