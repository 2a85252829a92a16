//! Fixed-timestep unicycle simulation of the differential-drive robot, its
//! front proximity sensor and the trackpad-to-velocity mapping used in direct
//! control.

use crate::geometry::{normalize_angle, Point2D, Pose2D};
use crate::map::OccupancyGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seconds per step.
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub robot_radius: f64,
    /// Sensing distance beyond the robot perimeter.
    pub proximity_range: f64,
    /// Full opening angle of the forward sensing sector.
    pub proximity_fov: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            v_max: 0.65,
            omega_max: PI,
            robot_radius: 0.18,
            proximity_range: 0.35,
            proximity_fov: 120f64.to_radians(),
        }
    }
}

impl SimConfig {
    /// Number of whole steps covering `seconds`.
    pub fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub linear: f64,
    pub angular: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand {
        linear: 0.0,
        angular: 0.0,
    };

    pub fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }

    fn clamped(self, cfg: &SimConfig) -> Self {
        Self {
            linear: self.linear.clamp(-cfg.v_max, cfg.v_max),
            angular: self.angular.clamp(-cfg.omega_max, cfg.omega_max),
        }
    }
}

/// Trackpad position. `y_axis` drives forward/back, `x_axis` turns
/// (positive = thumb right = turn right).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveInput {
    pub y_axis: f64,
    pub x_axis: f64,
}

impl DriveInput {
    pub fn new(y_axis: f64, x_axis: f64) -> Self {
        Self {
            y_axis: clamp_unit(y_axis),
            x_axis: clamp_unit(x_axis),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.y_axis == 0.0 && self.x_axis == 0.0
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub tick: u64,
    pub proximity_blocked: bool,
    /// Set when the last step's translation was rejected for overlapping an obstacle.
    pub collision_clamped: bool,
}

impl RobotState {
    pub fn at_rest(pose: Pose2D, grid: &OccupancyGrid, cfg: &SimConfig) -> Self {
        let mut state = Self {
            pose,
            linear_vel: 0.0,
            angular_vel: 0.0,
            tick: 0,
            proximity_blocked: false,
            collision_clamped: false,
        };
        state.proximity_blocked = proximity_check(grid, &state, cfg);
        state
    }

    pub fn position(&self) -> Point2D {
        self.pose.position()
    }
}

/// Advances the robot by one timestep.
pub fn step(
    state: &RobotState,
    cmd: VelocityCommand,
    grid: &OccupancyGrid,
    cfg: &SimConfig,
) -> RobotState {
    let cmd = cmd.clamped(cfg);
    let theta = state.pose.theta;
    let x = state.pose.x + cmd.linear * theta.cos() * cfg.dt;
    let y = state.pose.y + cmd.linear * theta.sin() * cfg.dt;
    let new_theta = normalize_angle(theta + cmd.angular * cfg.dt);

    let moved = x != state.pose.x || y != state.pose.y;
    let clamped = moved && disc_overlaps_obstacle(grid, Point2D::new(x, y), cfg.robot_radius);
    let mut next = RobotState {
        pose: if clamped {
            Pose2D {
                theta: new_theta,
                ..state.pose
            }
        } else {
            Pose2D {
                x,
                y,
                theta: new_theta,
            }
        },
        linear_vel: if clamped { 0.0 } else { cmd.linear },
        angular_vel: cmd.angular,
        tick: state.tick + 1,
        proximity_blocked: false,
        collision_clamped: clamped,
    };
    next.proximity_blocked = proximity_check(grid, &next, cfg);
    next
}

/// Squared distance from `p` to the axis-aligned square of cell `(cx, cy)`.
fn cell_distance_sq(grid: &OccupancyGrid, p: Point2D, cx: i64, cy: i64) -> f64 {
    let res = grid.resolution;
    let (x0, y0) = (cx as f64 * res, cy as f64 * res);
    let dx = (x0 - p.x).max(0.0).max(p.x - (x0 + res));
    let dy = (y0 - p.y).max(0.0).max(p.y - (y0 + res));
    dx * dx + dy * dy
}

/// True when a disc of `radius` at `center` strictly overlaps any occupied cell
/// (cells outside the map count as occupied).
pub fn disc_overlaps_obstacle(grid: &OccupancyGrid, center: Point2D, radius: f64) -> bool {
    let res = grid.resolution;
    let lo_x = ((center.x - radius) / res).floor() as i64;
    let hi_x = ((center.x + radius) / res).floor() as i64;
    let lo_y = ((center.y - radius) / res).floor() as i64;
    let hi_y = ((center.y + radius) / res).floor() as i64;
    for cy in lo_y..=hi_y {
        for cx in lo_x..=hi_x {
            if grid.is_occupied(cx, cy) && cell_distance_sq(grid, center, cx, cy) < radius * radius {
                return true;
            }
        }
    }
    false
}

/// Clearance between the robot disc and the nearest occupied cell (negative on overlap).
pub fn clearance(grid: &OccupancyGrid, center: Point2D, radius: f64, search: f64) -> f64 {
    let res = grid.resolution;
    let reach = radius + search;
    let lo_x = ((center.x - reach) / res).floor() as i64;
    let hi_x = ((center.x + reach) / res).floor() as i64;
    let lo_y = ((center.y - reach) / res).floor() as i64;
    let hi_y = ((center.y + reach) / res).floor() as i64;
    let mut best = f64::INFINITY;
    for cy in lo_y..=hi_y {
        for cx in lo_x..=hi_x {
            if grid.is_occupied(cx, cy) {
                best = best.min(cell_distance_sq(grid, center, cx, cy));
            }
        }
    }
    best.sqrt() - radius
}

/// Forward-sector proximity sensor: true iff an occupied cell intersects the
/// sector of half-angle `fov/2` reaching `proximity_range` beyond the perimeter.
pub fn proximity_check(grid: &OccupancyGrid, state: &RobotState, cfg: &SimConfig) -> bool {
    let sector = Sector {
        center: state.position(),
        heading: state.pose.theta,
        r_in: cfg.robot_radius,
        r_out: cfg.robot_radius + cfg.proximity_range,
        half_angle: 0.5 * cfg.proximity_fov,
    };
    let res = grid.resolution;
    let c = sector.center;
    let lo_x = ((c.x - sector.r_out) / res).floor() as i64;
    let hi_x = ((c.x + sector.r_out) / res).floor() as i64;
    let lo_y = ((c.y - sector.r_out) / res).floor() as i64;
    let hi_y = ((c.y + sector.r_out) / res).floor() as i64;
    for cy in lo_y..=hi_y {
        for cx in lo_x..=hi_x {
            if !grid.is_occupied(cx, cy) {
                continue;
            }
            let square = Square {
                x0: cx as f64 * res,
                y0: cy as f64 * res,
                x1: (cx + 1) as f64 * res,
                y1: (cy + 1) as f64 * res,
            };
            if sector.intersects(&square) {
                return true;
            }
        }
    }
    false
}

/// Maps trackpad input to a velocity command; while the proximity sensor is
/// triggered forward motion is suppressed but turning and reversing remain.
pub fn apply_direct_control(input: DriveInput, blocked: bool, cfg: &SimConfig) -> VelocityCommand {
    let input = DriveInput::new(input.y_axis, input.x_axis);
    let mut linear = input.y_axis * cfg.v_max;
    if blocked {
        linear = linear.min(0.0);
    }
    // -0.0 would leak into logs and hashes
    let angular = if input.x_axis == 0.0 {
        0.0
    } else {
        -input.x_axis * cfg.omega_max
    };
    VelocityCommand::new(linear, angular)
}

#[derive(Debug, Clone, Copy)]
struct Square {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Square {
    fn contains(&self, p: Point2D) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    fn corners(&self) -> [Point2D; 4] {
        [
            Point2D::new(self.x0, self.y0),
            Point2D::new(self.x1, self.y0),
            Point2D::new(self.x1, self.y1),
            Point2D::new(self.x0, self.y1),
        ]
    }

    fn edges(&self) -> [(Point2D, Point2D); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }
}

/// Annular sector: `r_in ≤ |p − center| ≤ r_out`, bearing within `half_angle` of `heading`.
#[derive(Debug, Clone, Copy)]
struct Sector {
    center: Point2D,
    heading: f64,
    r_in: f64,
    r_out: f64,
    half_angle: f64,
}

const GEOM_EPS: f64 = 1e-12;

impl Sector {
    fn contains(&self, p: Point2D) -> bool {
        let d = self.center.distance(&p);
        if d < self.r_in - GEOM_EPS || d > self.r_out + GEOM_EPS {
            return false;
        }
        self.within_angle(p)
    }

    fn within_angle(&self, p: Point2D) -> bool {
        let off = normalize_angle(self.center.bearing_to(&p) - self.heading);
        off.abs() <= self.half_angle + GEOM_EPS
    }

    fn boundary_rays(&self) -> [(Point2D, Point2D); 2] {
        [-self.half_angle, self.half_angle].map(|s| {
            let a = self.heading + s;
            let (sin, cos) = a.sin_cos();
            (
                Point2D::new(self.center.x + self.r_in * cos, self.center.y + self.r_in * sin),
                Point2D::new(self.center.x + self.r_out * cos, self.center.y + self.r_out * sin),
            )
        })
    }

    fn intersects(&self, sq: &Square) -> bool {
        if sq.corners().iter().any(|p| self.contains(*p)) {
            return true;
        }
        let rays = self.boundary_rays();
        if rays.iter().any(|(a, b)| sq.contains(*a) || sq.contains(*b)) {
            return true;
        }
        for (p, q) in sq.edges() {
            if rays.iter().any(|(a, b)| segments_intersect(p, q, *a, *b)) {
                return true;
            }
            for r in [self.r_in, self.r_out] {
                if segment_circle_points(p, q, self.center, r)
                    .into_iter()
                    .flatten()
                    .any(|hit| self.within_angle(hit))
                {
                    return true;
                }
            }
        }
        false
    }
}

fn cross(o: Point2D, a: Point2D, b: Point2D) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_intersect(p1: Point2D, p2: Point2D, q1: Point2D, q2: Point2D) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Point2D, b: Point2D, p: Point2D| {
        p.x >= a.x.min(b.x) - GEOM_EPS
            && p.x <= a.x.max(b.x) + GEOM_EPS
            && p.y >= a.y.min(b.y) - GEOM_EPS
            && p.y <= a.y.max(b.y) + GEOM_EPS
    };
    (d1.abs() <= GEOM_EPS && on_segment(q1, q2, p1))
        || (d2.abs() <= GEOM_EPS && on_segment(q1, q2, p2))
        || (d3.abs() <= GEOM_EPS && on_segment(p1, p2, q1))
        || (d4.abs() <= GEOM_EPS && on_segment(p1, p2, q2))
}

/// Points where segment `p→q` meets the circle of radius `r` about `c`.
fn segment_circle_points(p: Point2D, q: Point2D, c: Point2D, r: f64) -> [Option<Point2D>; 2] {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let (fx, fy) = (p.x - c.x, p.y - c.y);
    let a = dx * dx + dy * dy;
    let b = 2.0 * (fx * dx + fy * dy);
    let cc = fx * fx + fy * fy - r * r;
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return [None, None];
    }
    let sq = disc.sqrt();
    [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)].map(|t| {
        (-GEOM_EPS..=1.0 + GEOM_EPS)
            .contains(&t)
            .then(|| Point2D::new(p.x + t * dx, p.y + t * dy))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{load_map, Cell};
    use proptest::prelude::*;

    fn open_map(w: usize, h: usize) -> OccupancyGrid {
        let mut cells = vec![Cell::Free; w * h];
        for cx in 0..w {
            cells[cx] = Cell::Occupied;
            cells[(h - 1) * w + cx] = Cell::Occupied;
        }
        for cy in 0..h {
            cells[cy * w] = Cell::Occupied;
            cells[cy * w + w - 1] = Cell::Occupied;
        }
        OccupancyGrid::from_cells(w, h, 0.25, cells, Point2D::new(1.0, 1.0), Point2D::new(2.0, 1.0))
    }

    fn state_at(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState {
            pose: Pose2D::new(x, y, theta),
            linear_vel: 0.0,
            angular_vel: 0.0,
            tick: 0,
            proximity_blocked: false,
            collision_clamped: false,
        }
    }

    #[test]
    fn rest_keeps_pose() {
        let g = open_map(20, 20);
        let cfg = SimConfig::default();
        let s = state_at(2.5, 2.5, 0.3);
        let n = step(&s, VelocityCommand::STOP, &g, &cfg);
        assert_eq!(n.pose, s.pose);
        assert_eq!(n.tick, 1);
    }

    #[test]
    fn straight_line_integration() {
        let g = open_map(20, 20);
        let cfg = SimConfig::default();
        let s = state_at(2.5, 2.5, 0.0);
        let n = step(&s, VelocityCommand::new(1.0, 0.0), &g, &SimConfig { v_max: 1.0, ..cfg });
        assert!((n.pose.x - 2.52).abs() < 1e-15);
        assert_eq!(n.pose.y, 2.5);
    }

    #[test]
    fn driving_into_wall_stops_short() {
        // wall one cell ahead of the robot
        let g = load_map("res=0.5\n#######\n#.....#\n#S..#T#\n#.....#\n#######\n").unwrap();
        let cfg = SimConfig::default();
        let mut s = state_at(g.start_pose.x, g.start_pose.y, 0.0);
        let mut clamps = 0;
        for _ in 0..100 {
            s = step(&s, VelocityCommand::new(cfg.v_max, 0.0), &g, &cfg);
            clamps += s.collision_clamped as usize;
            assert!(clearance(&g, s.position(), cfg.robot_radius, 1.0) >= 0.0);
        }
        assert!(clamps > 0);
        assert_eq!(s.linear_vel, 0.0);
        // wall face at x = 2.0 m
        assert!(2.0 - s.pose.x >= cfg.robot_radius);
    }

    #[test]
    fn proximity_empty_map_is_false() {
        let g = open_map(40, 40);
        let cfg = SimConfig::default();
        assert!(!proximity_check(&g, &state_at(5.0, 5.0, 0.7), &cfg));
    }

    #[test]
    fn proximity_front_and_rear() {
        // wall column at cx = 20 → x ∈ [5.0, 5.25]
        let mut g = open_map(40, 40);
        for cy in 0..40 {
            let i = g.index(20, cy);
            g.cells[i] = Cell::Occupied;
        }
        let cfg = SimConfig::default();
        let gap = 0.1;
        let x = 5.0 - cfg.robot_radius - gap;
        assert!(proximity_check(&g, &state_at(x, 5.0, 0.0), &cfg));
        assert!(!proximity_check(&g, &state_at(x, 5.0, PI), &cfg));
        let x_behind = 5.25 + cfg.robot_radius + gap;
        assert!(!proximity_check(&g, &state_at(x_behind, 5.0, 0.0), &cfg));
        // beyond range
        assert!(!proximity_check(&g, &state_at(5.0 - cfg.robot_radius - 0.4, 5.0, 0.0), &cfg));
    }

    #[test]
    fn direct_control_mapping() {
        let cfg = SimConfig::default();
        assert_eq!(
            apply_direct_control(DriveInput::new(1.0, 0.0), false, &cfg),
            VelocityCommand::new(cfg.v_max, 0.0)
        );
        assert_eq!(
            apply_direct_control(DriveInput::new(1.0, 0.0), true, &cfg),
            VelocityCommand::new(0.0, 0.0)
        );
        assert_eq!(
            apply_direct_control(DriveInput::new(-1.0, 0.5), true, &cfg),
            VelocityCommand::new(-cfg.v_max, -0.5 * cfg.omega_max)
        );
        assert_eq!(DriveInput::new(3.0, -7.0), DriveInput::new(1.0, -1.0));
    }

    /// Dense polar sampling of an annular sector.
    fn sampled_hit(g: &OccupancyGrid, s: &RobotState, r_in: f64, r_out: f64, half: f64) -> bool {
        for i in 0..=140 {
            let r = r_in + (r_out - r_in) * i as f64 / 140.0;
            for j in 0..=240 {
                let a = s.pose.theta - half + 2.0 * half * j as f64 / 240.0;
                let p = Point2D::new(s.pose.x + r * a.cos(), s.pose.y + r * a.sin());
                let (cx, cy) = g.cell_of(&p);
                if g.is_occupied(cx, cy) {
                    return true;
                }
            }
        }
        false
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn sector_test_agrees_with_sampling(x in 1.0f64..4.0, y in 1.0f64..4.0, th in -PI..PI, seed in 0u64..1000) {
            let mut g = open_map(20, 20);
            let mut v = seed;
            for i in 0..g.cells.len() {
                v = v.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if (v >> 33) % 9 == 0 { g.cells[i] = Cell::Occupied; }
            }
            let s = state_at(x, y, th);
            let cfg = SimConfig::default();
            let exact = proximity_check(&g, &s, &cfg);
            let (r_in, r_out, half) = (cfg.robot_radius, cfg.robot_radius + cfg.proximity_range, cfg.proximity_fov / 2.0);
            // sandwich between a slightly shrunk and a slightly grown sampled sector
            if sampled_hit(&g, &s, r_in + 0.01, r_out - 0.01, half - 0.02) {
                prop_assert!(exact);
            }
            if exact {
                prop_assert!(sampled_hit(&g, &s, r_in - 0.01, r_out + 0.01, half + 0.02));
            }
        }

        #[test]
        fn step_is_pure_and_normalizes(x in 1.0f64..4.0, y in 1.0f64..4.0, th in -PI..PI, v in -1.0f64..1.0, w in -4.0f64..4.0) {
            let g = open_map(20, 20);
            let cfg = SimConfig::default();
            let s = state_at(x, y, th);
            let a = step(&s, VelocityCommand::new(v, w), &g, &cfg);
            let b = step(&s, VelocityCommand::new(v, w), &g, &cfg);
            prop_assert_eq!(a, b);
            prop_assert!(a.pose.theta > -PI && a.pose.theta <= PI);
            prop_assert!(a.linear_vel.abs() <= cfg.v_max && a.angular_vel.abs() <= cfg.omega_max);
        }

        #[test]
        fn blocked_never_drives_forward(y in -2.0f64..2.0, x in -2.0f64..2.0) {
            let cmd = apply_direct_control(DriveInput::new(y, x), true, &SimConfig::default());
            prop_assert!(cmd.linear <= 0.0);
        }
    }
}
