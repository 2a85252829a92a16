//! Occupancy-grid world: ASCII map loading and the forward/reverse/mirror variants
//! used across the trial sequence.
//!
//! Map text is read top row first, so the file looks like a top-down view: the
//! last text line is `y = 0`. Cell `(cx, cy)` covers
//! `[cx·res, (cx+1)·res] × [cy·res, (cy+1)·res]`.

use crate::geometry::{Point2D, Pose2D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RESOLUTION: f64 = 0.25;
pub const DEFAULT_GOAL_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("malformed map at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> MapError {
    MapError::Malformed {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
    /// Row-major from `cy = 0`.
    pub cells: Vec<Cell>,
    pub start_pose: Pose2D,
    pub goal_center: Point2D,
    pub goal_radius: f64,
    /// x coordinate of the line whose crossing triggers the bonus-round delay onset.
    pub midline_x: f64,
}

impl OccupancyGrid {
    /// Builds a grid from explicit cells; start faces the goal.
    pub fn from_cells(
        width_cells: usize,
        height_cells: usize,
        resolution: f64,
        cells: Vec<Cell>,
        start: Point2D,
        goal: Point2D,
    ) -> Self {
        assert_eq!(cells.len(), width_cells * height_cells);
        Self {
            width_cells,
            height_cells,
            resolution,
            cells,
            start_pose: Pose2D::new(start.x, start.y, start.bearing_to(&goal)),
            goal_center: goal,
            goal_radius: DEFAULT_GOAL_RADIUS,
            midline_x: 0.5 * (start.x + goal.x),
        }
    }

    pub fn width_m(&self) -> f64 {
        self.width_cells as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height_cells as f64 * self.resolution
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width_cells + cx
    }

    pub fn in_bounds(&self, cx: i64, cy: i64) -> bool {
        cx >= 0 && cy >= 0 && (cx as usize) < self.width_cells && (cy as usize) < self.height_cells
    }

    pub fn cell(&self, cx: usize, cy: usize) -> Cell {
        self.cells[self.index(cx, cy)]
    }

    /// Out-of-bounds cells count as occupied: the map border is a wall.
    pub fn is_occupied(&self, cx: i64, cy: i64) -> bool {
        !self.in_bounds(cx, cy) || self.cell(cx as usize, cy as usize) == Cell::Occupied
    }

    pub fn cell_of(&self, p: &Point2D) -> (i64, i64) {
        (
            (p.x / self.resolution).floor() as i64,
            (p.y / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2D {
        Point2D::new(
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Occupied).count()
    }

    /// Renders the grid back to the ASCII map format.
    pub fn to_ascii(&self) -> String {
        let (scx, scy) = self.cell_of(&self.start_pose.position());
        let (tcx, tcy) = self.cell_of(&self.goal_center);
        let mid_col = (self.midline_x / self.resolution - 0.5).round();
        let mid_col = ((mid_col + 0.5) * self.resolution == self.midline_x).then_some(mid_col as i64);
        let mut out = format!("res={}\n", self.resolution);
        for cy in (0..self.height_cells).rev() {
            for cx in 0..self.width_cells {
                let (x, y) = (cx as i64, cy as i64);
                let ch = if (x, y) == (scx, scy) {
                    'S'
                } else if (x, y) == (tcx, tcy) {
                    'T'
                } else if self.cell(cx, cy) == Cell::Occupied {
                    '#'
                } else if Some(x) == mid_col {
                    '|'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the ASCII map format.
pub fn load_map(text: &str) -> Result<OccupancyGrid, MapError> {
    let mut resolution = DEFAULT_RESOLUTION;
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(value) = line.trim().strip_prefix("res=") {
            if !rows.is_empty() {
                return Err(malformed(line_no, "header after map rows"));
            }
            resolution = value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|r| r.is_finite() && *r > 0.0)
                .ok_or_else(|| malformed(line_no, format!("bad resolution {value:?}")))?;
            continue;
        }
        rows.push((line_no, line));
    }
    if rows.is_empty() {
        return Err(malformed(0, "no map rows"));
    }

    let width = rows[0].1.chars().count();
    let height = rows.len();
    let mut cells = vec![Cell::Free; width * height];
    let mut start = None;
    let mut goal = None;
    let mut midline_col: Option<usize> = None;

    for (r, (line_no, row)) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(malformed(
                *line_no,
                format!("row has {} cells, expected {width}", row.chars().count()),
            ));
        }
        let cy = height - 1 - r;
        for (cx, ch) in row.chars().enumerate() {
            let cell = match ch {
                '#' => Cell::Occupied,
                '.' => Cell::Free,
                'S' => {
                    if start.replace((cx, cy)).is_some() {
                        return Err(malformed(*line_no, "duplicate start 'S'"));
                    }
                    Cell::Free
                }
                'T' => {
                    if goal.replace((cx, cy)).is_some() {
                        return Err(malformed(*line_no, "duplicate target 'T'"));
                    }
                    Cell::Free
                }
                '|' => {
                    match midline_col {
                        Some(c) if c != cx => {
                            return Err(malformed(*line_no, "midline markers in more than one column"))
                        }
                        _ => midline_col = Some(cx),
                    }
                    Cell::Free
                }
                other => return Err(malformed(*line_no, format!("illegal character {other:?}"))),
            };
            cells[cy * width + cx] = cell;
        }
    }

    let (scx, scy) = start.ok_or_else(|| malformed(0, "missing start 'S'"))?;
    let (tcx, tcy) = goal.ok_or_else(|| malformed(0, "missing target 'T'"))?;
    let centre = |cx: usize, cy: usize| {
        Point2D::new((cx as f64 + 0.5) * resolution, (cy as f64 + 0.5) * resolution)
    };
    let mut grid = OccupancyGrid::from_cells(
        width,
        height,
        resolution,
        cells,
        centre(scx, scy),
        centre(tcx, tcy),
    );
    if let Some(c) = midline_col {
        grid.midline_x = (c as f64 + 0.5) * resolution;
    }
    Ok(grid)
}

/// Reflects the world about its vertical centre line. The start heading is
/// re-aimed at the mirrored goal.
pub fn mirror_map(grid: &OccupancyGrid) -> OccupancyGrid {
    let w = grid.width_cells;
    let mut cells = Vec::with_capacity(grid.cells.len());
    for cy in 0..grid.height_cells {
        for cx in 0..w {
            cells.push(grid.cell(w - 1 - cx, cy));
        }
    }
    let width_m = grid.width_m();
    let start = Point2D::new(width_m - grid.start_pose.x, grid.start_pose.y);
    let goal = Point2D::new(width_m - grid.goal_center.x, grid.goal_center.y);
    OccupancyGrid {
        cells,
        start_pose: Pose2D::new(start.x, start.y, start.bearing_to(&goal)),
        goal_center: goal,
        midline_x: width_m - grid.midline_x,
        ..grid.clone()
    }
}

/// Swaps start and goal; the new start faces the new goal.
pub fn reverse_map(grid: &OccupancyGrid) -> OccupancyGrid {
    let start = grid.goal_center;
    let goal = grid.start_pose.position();
    OccupancyGrid {
        start_pose: Pose2D::new(start.x, start.y, start.bearing_to(&goal)),
        goal_center: goal,
        ..grid.clone()
    }
}

/// Map variants used by the trial sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapVariant {
    #[serde(rename = "F")]
    Forward,
    #[serde(rename = "R")]
    Reverse,
    #[serde(rename = "FM")]
    ForwardMirrored,
    #[serde(rename = "RM")]
    ReverseMirrored,
    #[serde(rename = "Bonus")]
    Bonus,
}

impl MapVariant {
    pub fn apply(self, base: &OccupancyGrid) -> OccupancyGrid {
        match self {
            MapVariant::Forward | MapVariant::Bonus => base.clone(),
            MapVariant::Reverse => reverse_map(base),
            MapVariant::ForwardMirrored => mirror_map(base),
            MapVariant::ReverseMirrored => mirror_map(&reverse_map(base)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MapVariant::Forward => "F",
            MapVariant::Reverse => "R",
            MapVariant::ForwardMirrored => "FM",
            MapVariant::ReverseMirrored => "RM",
            MapVariant::Bonus => "Bonus",
        }
    }
}

/// The shipped trial environment.
pub const TRIAL_FORWARD_MAP: &str = include_str!("../assets/trial_forward.map");
/// The shipped environment with start and target swapped.
pub const TRIAL_REVERSE_MAP: &str = include_str!("../assets/trial_reverse.map");

pub fn trial_forward() -> OccupancyGrid {
    load_map(TRIAL_FORWARD_MAP).expect("shipped map parses")
}
