//! Autonomous navigation for waypoint control: obstacle inflation, 8-connected
//! A* with exact step costs, line-of-sight smoothing and a pure-pursuit follower.

use crate::geometry::{normalize_angle, Point2D};
use crate::map::{Cell, OccupancyGrid};
use crate::sim::{RobotState, SimConfig, VelocityCommand};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostCell {
    Free,
    Inflated,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
    pub cells: Vec<CostCell>,
}

impl Costmap {
    pub fn cell(&self, cx: usize, cy: usize) -> CostCell {
        self.cells[cy * self.width_cells + cx]
    }

    /// Only in-bounds `Free` cells can be entered.
    pub fn traversable(&self, cx: i64, cy: i64) -> bool {
        cx >= 0
            && cy >= 0
            && (cx as usize) < self.width_cells
            && (cy as usize) < self.height_cells
            && self.cell(cx as usize, cy as usize) == CostCell::Free
    }

    pub fn cell_of(&self, p: &Point2D) -> (i64, i64) {
        (
            (p.x / self.resolution).floor() as i64,
            (p.y / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, cx: i64, cy: i64) -> Point2D {
        Point2D::new(
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_traversable_point(&self, p: &Point2D) -> bool {
        let (cx, cy) = self.cell_of(p);
        self.traversable(cx, cy)
    }

    pub fn count(&self, kind: CostCell) -> usize {
        self.cells.iter().filter(|c| **c == kind).count()
    }

    /// True when every cell touched by the segment `a→b` is traversable.
    /// Segments passing exactly through a cell corner check both side cells.
    pub fn line_of_sight(&self, a: &Point2D, b: &Point2D) -> bool {
        let res = self.resolution;
        let (mut cx, mut cy) = self.cell_of(a);
        let end = self.cell_of(b);
        if !self.traversable(cx, cy) || !self.traversable(end.0, end.1) {
            return false;
        }
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let step_x: i64 = if dx > 0.0 { 1 } else if dx < 0.0 { -1 } else { 0 };
        let step_y: i64 = if dy > 0.0 { 1 } else if dy < 0.0 { -1 } else { 0 };
        let boundary = |c: i64, step: i64| if step > 0 { (c + 1) as f64 * res } else { c as f64 * res };
        let mut t_max_x = if step_x != 0 { (boundary(cx, step_x) - a.x) / dx } else { f64::INFINITY };
        let mut t_max_y = if step_y != 0 { (boundary(cy, step_y) - a.y) / dy } else { f64::INFINITY };
        let t_delta_x = if step_x != 0 { res / dx.abs() } else { f64::INFINITY };
        let t_delta_y = if step_y != 0 { res / dy.abs() } else { f64::INFINITY };

        while (cx, cy) != end {
            let t = t_max_x.min(t_max_y);
            if t > 1.0 {
                break;
            }
            match t_max_x.partial_cmp(&t_max_y) {
                Some(Ordering::Less) => {
                    cx += step_x;
                    t_max_x += t_delta_x;
                }
                Some(Ordering::Greater) => {
                    cy += step_y;
                    t_max_y += t_delta_y;
                }
                _ => {
                    if !self.traversable(cx + step_x, cy) || !self.traversable(cx, cy + step_y) {
                        return false;
                    }
                    cx += step_x;
                    cy += step_y;
                    t_max_x += t_delta_x;
                    t_max_y += t_delta_y;
                }
            }
            if !self.traversable(cx, cy) {
                return false;
            }
        }
        true
    }
}

/// Marks every non-occupied cell whose centre lies within `radius` (centre to
/// centre) of an occupied cell as `Inflated`.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> Costmap {
    let (w, h) = (grid.width_cells, grid.height_cells);
    let mut cells: Vec<CostCell> = grid
        .cells
        .iter()
        .map(|c| match c {
            Cell::Free => CostCell::Free,
            Cell::Occupied => CostCell::Occupied,
        })
        .collect();
    let r_cells = radius.max(0.0) / grid.resolution;
    let reach = r_cells.floor() as i64;
    let r_sq = r_cells * r_cells;
    for cy in 0..h as i64 {
        for cx in 0..w as i64 {
            if grid.cell(cx as usize, cy as usize) != Cell::Occupied {
                continue;
            }
            for oy in -reach..=reach {
                for ox in -reach..=reach {
                    let (nx, ny) = (cx + ox, cy + oy);
                    if (ox == 0 && oy == 0) || !grid.in_bounds(nx, ny) {
                        continue;
                    }
                    if (ox * ox + oy * oy) as f64 <= r_sq {
                        let i = ny as usize * w + nx as usize;
                        if cells[i] == CostCell::Free {
                            cells[i] = CostCell::Inflated;
                        }
                    }
                }
            }
        }
    }
    Costmap {
        width_cells: w,
        height_cells: h,
        resolution: grid.resolution,
        cells,
    }
}

/// Exact path cost on the 8-connected grid: `straight + diagonal·√2` cell lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GridCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridCost {
    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

impl Ord for GridCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare (a1 - a2) against (b2 - b1)·√2 without rounding
        let da = self.straight as i64 - other.straight as i64;
        let db = other.diagonal as i64 - self.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (s, d) if s >= 0 && d <= 0 => Ordering::Greater,
            (s, d) if s <= 0 && d >= 0 => Ordering::Less,
            (s, _) => {
                let lhs = (da as i128) * (da as i128);
                let rhs = 2 * (db as i128) * (db as i128);
                let mag = lhs.cmp(&rhs);
                if s > 0 {
                    mag
                } else {
                    mag.reverse()
                }
            }
        }
    }
}

impl PartialOrd for GridCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2D>,
    pub total_length: f64,
    /// Optimal grid cost before smoothing, in meters.
    pub grid_cost: f64,
}

impl Path {
    pub fn from_waypoints(waypoints: Vec<Point2D>, grid_cost: f64) -> Self {
        let total_length = polyline_length(&waypoints);
        Self {
            waypoints,
            total_length,
            grid_cost,
        }
    }

    pub fn goal(&self) -> Point2D {
        *self.waypoints.last().expect("path has at least one waypoint")
    }
}

pub fn polyline_length(points: &[Point2D]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PlanError {
    #[error("goal lies on an occupied or inflated cell")]
    GoalBlocked,
    #[error("start lies on an occupied or inflated cell")]
    StartBlocked,
    #[error("no traversable route to the goal")]
    GoalUnreachable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    cx: i64,
    cy: i64,
    g: GridCost,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: invert so the smallest (f, y, x) pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.cy.cmp(&self.cy))
            .then_with(|| other.cx.cmp(&self.cx))
            .then_with(|| other.g.cmp(&self.g))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBOURS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

/// A* over traversable cells; returns the optimal cell sequence and its exact cost.
pub fn astar_cells(
    costmap: &Costmap,
    start: (i64, i64),
    goal: (i64, i64),
) -> Result<(Vec<(i64, i64)>, GridCost), PlanError> {
    if !costmap.traversable(goal.0, goal.1) {
        return Err(PlanError::GoalBlocked);
    }
    if !costmap.traversable(start.0, start.1) {
        return Err(PlanError::StartBlocked);
    }
    let w = costmap.width_cells;
    let idx = |cx: i64, cy: i64| cy as usize * w + cx as usize;
    let mut best: Vec<Option<GridCost>> = vec![None; costmap.cells.len()];
    let mut parent: Vec<usize> = vec![usize::MAX; costmap.cells.len()];
    let heuristic = |cx: i64, cy: i64| ((cx - goal.0) as f64).hypot((cy - goal.1) as f64);

    let mut open = BinaryHeap::new();
    best[idx(start.0, start.1)] = Some(GridCost::default());
    open.push(OpenEntry {
        f: heuristic(start.0, start.1),
        cx: start.0,
        cy: start.1,
        g: GridCost::default(),
    });

    while let Some(OpenEntry { cx, cy, g, .. }) = open.pop() {
        if best[idx(cx, cy)] != Some(g) {
            continue;
        }
        if (cx, cy) == goal {
            let mut cells = vec![(cx, cy)];
            let mut i = idx(cx, cy);
            while parent[i] != usize::MAX {
                i = parent[i];
                cells.push(((i % w) as i64, (i / w) as i64));
            }
            cells.reverse();
            return Ok((cells, g));
        }
        for (ox, oy) in NEIGHBOURS {
            let (nx, ny) = (cx + ox, cy + oy);
            if !costmap.traversable(nx, ny) {
                continue;
            }
            let diagonal = ox != 0 && oy != 0;
            if diagonal && (!costmap.traversable(cx + ox, cy) || !costmap.traversable(cx, cy + oy)) {
                continue;
            }
            let ng = if diagonal {
                GridCost { diagonal: g.diagonal + 1, ..g }
            } else {
                GridCost { straight: g.straight + 1, ..g }
            };
            let ni = idx(nx, ny);
            if best[ni].map_or(true, |old| ng < old) {
                best[ni] = Some(ng);
                parent[ni] = idx(cx, cy);
                open.push(OpenEntry {
                    f: ng.cells() + heuristic(nx, ny),
                    cx: nx,
                    cy: ny,
                    g: ng,
                });
            }
        }
    }
    Err(PlanError::GoalUnreachable)
}

/// Greedy shortcutting: from each kept point jump to the furthest later point in
/// line of sight.
pub fn smooth(costmap: &Costmap, points: &[Point2D]) -> Vec<Point2D> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut next = i + 1;
        for j in (i + 2..points.len()).rev() {
            if costmap.line_of_sight(&points[i], &points[j]) {
                next = j;
                break;
            }
        }
        out.push(points[next]);
        i = next;
    }
    out
}

/// Plans from `start` to `goal`: optimal grid route, then smoothed.
pub fn plan(costmap: &Costmap, start: Point2D, goal: Point2D) -> Result<Path, PlanError> {
    let (cells, cost) = plan_raw(costmap, start, goal)?;
    let smoothed = smooth(costmap, &cells);
    Ok(Path::from_waypoints(smoothed, cost.cells() * costmap.resolution))
}

/// Unsmoothed route: start point, intermediate cell centres, goal point.
pub fn plan_raw(
    costmap: &Costmap,
    start: Point2D,
    goal: Point2D,
) -> Result<(Vec<Point2D>, GridCost), PlanError> {
    let s = costmap.cell_of(&start);
    let g = costmap.cell_of(&goal);
    let (cells, cost) = astar_cells(costmap, s, g)?;
    let mut points = Vec::with_capacity(cells.len() + 1);
    points.push(start);
    if cells.len() > 1 {
        points.extend(cells[1..cells.len() - 1].iter().map(|&(cx, cy)| costmap.cell_center(cx, cy)));
        points.push(goal);
    } else if goal != start {
        points.push(goal);
    }
    Ok((points, cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub lookahead: f64,
    pub heading_gain: f64,
    pub arrive_tolerance: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.5,
            heading_gain: 2.0,
            arrive_tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Obstacle inflation used for waypoint navigation.
    pub inflation_radius: f64,
    pub follower: FollowerConfig,
}

impl PlannerConfig {
    /// Inflation covering the robot disc for any pose inside a free cell, plus a
    /// margin for the follower cutting corners.
    pub fn for_robot(sim: &SimConfig, resolution: f64) -> Self {
        Self {
            inflation_radius: sim.robot_radius + resolution * SQRT_2 + 0.15,
            follower: FollowerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FollowStatus {
    Tracking,
    Arrived,
}

/// Closest point on the polyline to `p`, as (segment index, parameter in [0,1]).
fn project_onto(points: &[Point2D], p: &Point2D) -> (usize, f64) {
    let mut best = (0, 0.0, f64::INFINITY);
    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len_sq = dx * dx + dy * dy;
        let t = if len_sq == 0.0 {
            0.0
        } else {
            (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0)
        };
        let q = Point2D::new(a.x + t * dx, a.y + t * dy);
        let d = q.distance(p);
        if d < best.2 {
            best = (i, t, d);
        }
    }
    (best.0, best.1)
}

/// First point along the path, from the robot's projection onwards, that is at
/// least `lookahead` away from the robot; the final waypoint if none is.
pub fn lookahead_point(path: &Path, robot: &Point2D, lookahead: f64) -> Point2D {
    let pts = &path.waypoints;
    if pts.len() < 2 {
        return path.goal();
    }
    let (seg, t) = project_onto(pts, robot);
    let mut from = Point2D::new(
        pts[seg].x + t * (pts[seg + 1].x - pts[seg].x),
        pts[seg].y + t * (pts[seg + 1].y - pts[seg].y),
    );
    for to in &pts[seg + 1..] {
        if to.distance(robot) >= lookahead {
            // circle/segment intersection from `from` (inside the circle) toward `to`
            let (dx, dy) = (to.x - from.x, to.y - from.y);
            let (fx, fy) = (from.x - robot.x, from.y - robot.y);
            let a = dx * dx + dy * dy;
            let b = 2.0 * (fx * dx + fy * dy);
            let c = fx * fx + fy * fy - lookahead * lookahead;
            if a == 0.0 || c >= 0.0 {
                return *to;
            }
            let s = ((-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
            return Point2D::new(from.x + s * dx, from.y + s * dy);
        }
        from = *to;
    }
    path.goal()
}

/// Pure-pursuit velocity command toward the lookahead point.
pub fn follow(
    path: &Path,
    state: &RobotState,
    sim: &SimConfig,
    cfg: &FollowerConfig,
) -> (VelocityCommand, FollowStatus) {
    let robot = state.position();
    if robot.distance(&path.goal()) <= cfg.arrive_tolerance {
        return (VelocityCommand::STOP, FollowStatus::Arrived);
    }
    let target = lookahead_point(path, &robot, cfg.lookahead);
    let error = normalize_angle(robot.bearing_to(&target) - state.pose.theta);
    let angular = (cfg.heading_gain * error).clamp(-sim.omega_max, sim.omega_max);
    let abs = error.abs();
    let linear = if abs <= FRAC_PI_4 {
        sim.v_max
    } else if abs <= FRAC_PI_2 {
        sim.v_max * (FRAC_PI_2 - abs) / FRAC_PI_4
    } else {
        0.0
    };
    (VelocityCommand::new(linear, angular), FollowStatus::Tracking)
}
