//! Scripted operators. Each bot sees only what a human would: frames that have
//! come back over the downlink, delayed further by its own reaction time.

use crate::geometry::{normalize_angle, Point2D};
use crate::map::{MapVariant, OccupancyGrid};
use crate::planner::{inflate, plan, Costmap, Path, PlanError};
use crate::selection::{aim_at, arc_project, ArcConfig, SelectionMode, Vec3, HAND_HEIGHT};
use crate::session::{ControlMode, ExperimentPlan, Order, Session, SessionConfig, SessionError, TrialResult, TrialSpec};
use crate::sim::{DriveInput, SimConfig};
use crate::wire::{ControlMethod, Direction, StateFrame, WireCommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BotKind {
    DirectBot,
    WaypointBot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BotConfig {
    pub kind: BotKind,
    /// Seconds between a frame arriving and the bot acting on it.
    pub reaction_delay: f64,
    pub waypoint_spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BotError {
    #[error("reaction delay must be non-negative")]
    NegativeReaction,
    #[error("waypoint spacing must be positive")]
    BadSpacing,
    #[error("no oracle route: {0}")]
    NoRoute(PlanError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("trial did not finish within {0} ticks")]
    Timeout(u64),
}

impl BotConfig {
    pub fn new(kind: BotKind) -> Self {
        Self {
            kind,
            reaction_delay: 0.25,
            waypoint_spacing: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), BotError> {
        if !(self.reaction_delay >= 0.0) {
            return Err(BotError::NegativeReaction);
        }
        if !(self.waypoint_spacing > 0.0) {
            return Err(BotError::BadSpacing);
        }
        Ok(())
    }
}

/// Clearance kept by the oracle route.
pub const ORACLE_CLEARANCE: f64 = 0.9;

/// Clearance of the straight lines the direct bot is willing to steer along.
pub const SIGHT_CLEARANCE: f64 = 0.8;

/// Reference route on the true map, with a sight map for visibility checks.
#[derive(Debug, Clone)]
pub struct OraclePath {
    pub path: Path,
    /// Cumulative arc length at each waypoint.
    stations: Vec<f64>,
    sight: Costmap,
    tight: Costmap,
    view: Costmap,
}

impl OraclePath {
    pub fn new(grid: &OccupancyGrid, sim: &SimConfig) -> Result<Self, PlanError> {
        let costmap = inflate(grid, ORACLE_CLEARANCE.max(sim.robot_radius));
        let path = plan(&costmap, grid.start_pose.position(), grid.goal_center)?;
        let mut stations = vec![0.0];
        for w in path.waypoints.windows(2) {
            stations.push(stations.last().unwrap() + w[0].distance(&w[1]));
        }
        Ok(Self {
            path,
            stations,
            sight: inflate(grid, SIGHT_CLEARANCE),
            tight: inflate(grid, 0.65),
            view: inflate(grid, 0.0),
        })
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    /// Point at arc length `s`, clamped to the route.
    pub fn at(&self, s: f64) -> Point2D {
        let s = s.clamp(0.0, self.length());
        let pts = &self.path.waypoints;
        for i in 1..pts.len() {
            if s <= self.stations[i] {
                let seg = self.stations[i] - self.stations[i - 1];
                let u = if seg == 0.0 { 0.0 } else { (s - self.stations[i - 1]) / seg };
                return Point2D::new(pts[i - 1].x + u * (pts[i].x - pts[i - 1].x), pts[i - 1].y + u * (pts[i].y - pts[i - 1].y));
            }
        }
        *pts.last().unwrap()
    }

    /// Arc length of the route point closest to `p`.
    pub fn project(&self, p: &Point2D) -> f64 {
        let pts = &self.path.waypoints;
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..pts.len() {
            let (a, b) = (pts[i - 1], pts[i]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len_sq = dx * dx + dy * dy;
            let u = if len_sq == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0) };
            let q = Point2D::new(a.x + u * dx, a.y + u * dy);
            let d = q.distance(p);
            if d < best.0 {
                best = (d, self.stations[i - 1] + u * len_sq.sqrt());
            }
        }
        best.1
    }

    /// Straight line with the direct bot's clearance.
    pub fn visible(&self, from: &Point2D, to: &Point2D) -> bool {
        self.sight.line_of_sight(from, to)
    }

    /// Unobstructed view between two points.
    pub fn in_view(&self, from: &Point2D, to: &Point2D) -> bool {
        self.view.line_of_sight(from, to)
    }
}

/// Tunables of the direct-control operator model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectParams {
    /// Stick deflection per radian of heading error.
    pub heading_gain: f64,
    /// Furthest route point the bot steers toward.
    pub sight_range: f64,
    /// Heading error beyond which the bot stops driving forward.
    pub drive_cone: f64,
    /// Loop gain times latency the bot settles for once it has felt the lag.
    pub latency_margin: f64,
}

impl Default for DirectParams {
    fn default() -> Self {
        Self {
            heading_gain: 1.2,
            sight_range: 3.0,
            drive_cone: 50f64.to_radians(),
            latency_margin: 0.6,
        }
    }
}

fn quantize(v: f64) -> f64 {
    ((v * 20.0).round() / 20.0).clamp(-1.0, 1.0) + 0.0
}

/// Stick input steering the observed robot toward the furthest visible route point.
pub fn direct_bot_step(observed: &StateFrame, oracle: &OraclePath, goal: &Point2D, goal_radius: f64, params: &DirectParams) -> DriveInput {
    let pose = observed.robot.pose;
    let here = pose.position();
    if here.distance(goal) <= goal_radius {
        return DriveInput::default();
    }
    let s0 = oracle.project(&here);
    let target = [&oracle.sight, &oracle.tight]
        .into_iter()
        .find_map(|map| {
            let mut s = s0 + params.sight_range;
            while s > s0 + 0.5 {
                let p = oracle.at(s);
                if map.line_of_sight(&here, &p) {
                    return Some(p);
                }
                s -= 0.1;
            }
            None
        })
        .unwrap_or_else(|| oracle.at(s0 + 1.0));
    let err = normalize_angle(here.bearing_to(&target) - pose.theta);
    let x = quantize(-params.heading_gain * err);
    let y = if observed.robot.proximity_warning {
        -0.3
    } else if err.abs() >= params.drive_cone {
        0.0
    } else {
        quantize(1.0 - err.abs() / params.drive_cone)
    };
    DriveInput::new(y, x)
}

/// Selection commands placing a target at `target`, or `None` when the arc
/// cannot land there.
pub fn aim_commands(hand_at: Point2D, target: Point2D, costmap: &Costmap, arc: &ArcConfig) -> Option<[WireCommand; 4]> {
    let pose = aim_at(Vec3::new(hand_at.x, hand_at.y, HAND_HEIGHT), target, arc)?;
    arc_project(&pose, costmap, arc)?;
    Some([WireCommand::AimBegin, WireCommand::AimUpdate(pose), WireCommand::AimRelease, WireCommand::Confirm])
}

/// Remaining distance at which the waypoint bot lines up the next target.
pub const HANDOFF_DISTANCE: f64 = 1.2;

/// Next route target for the waypoint bot: the route point `spacing` beyond
/// `from_s`, pulled back into view of the observed robot but no closer than
/// `min_step`. A target the arc cannot place is retried at half the spacing.
pub fn waypoint_bot_step(
    observed: &StateFrame,
    from_s: f64,
    min_step: f64,
    oracle: &OraclePath,
    costmap: &Costmap,
    arc: &ArcConfig,
    spacing: f64,
) -> Option<(f64, [WireCommand; 4])> {
    let here = observed.robot.pose.position();
    let floor = (from_s + min_step).min(oracle.length() - 1e-9);
    for sp in [spacing, spacing / 2.0] {
        let mut s = (from_s + sp).min(oracle.length());
        while s > floor && !oracle.in_view(&here, &oracle.at(s)) {
            s -= 0.25;
        }
        if s > floor {
            if let Some(cmds) = aim_commands(here, oracle.at(s), costmap, arc) {
                return Some((s, cmds));
            }
        }
    }
    None
}

/// Answers arrow stimuli after a seeded reaction time.
#[derive(Debug, Clone)]
pub struct StimulusResponder {
    rng: ChaCha8Rng,
    pending: Option<(usize, u64, Direction)>,
    answered: Option<usize>,
    error_rate: f64,
}

impl StimulusResponder {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            answered: None,
            error_rate: 0.05,
        }
    }

    pub fn act(&mut self, frame: &StateFrame, tick: u64, dt: f64) -> Option<WireCommand> {
        if let Some(st) = frame.stimuli.first() {
            let fresh = self.answered != Some(st.id) && self.pending.map_or(true, |(id, _, _)| id != st.id);
            if fresh {
                let rt: f64 = self.rng.gen_range(0.45..1.1);
                let wrong = self.rng.gen_bool(self.error_rate);
                let button = match (st.direction, wrong) {
                    (Direction::Left, false) | (Direction::Right, true) => Direction::Left,
                    _ => Direction::Right,
                };
                self.pending = Some((st.id, tick + (rt / dt).round() as u64, button));
            }
        }
        match self.pending {
            Some((id, due, button)) if tick >= due => {
                self.pending = None;
                self.answered = Some(id);
                frame
                    .stimuli
                    .first()
                    .filter(|s| s.id == id)
                    .map(|_| WireCommand::StimulusResponse { button })
            }
            _ => None,
        }
    }
}

/// A bot bound to one trial.
#[derive(Debug, Clone)]
pub struct Bot {
    pub config: BotConfig,
    pub direct: DirectParams,
    oracle: OraclePath,
    goal: Point2D,
    goal_radius: f64,
    reaction_ticks: usize,
    seen: VecDeque<StateFrame>,
    last_input: Option<DriveInput>,
    /// Tick of the first non-zero stick command, until its effect is seen.
    probe: Option<u64>,
    /// Measured command-to-observation latency in seconds.
    latency: Option<f64>,
    /// Route station of the last requested target and the tick it was sent.
    pending: Option<(f64, u64)>,
    switch_sent: Option<u64>,
    current_s: f64,
    responder: StimulusResponder,
}

/// Observed ticks to wait for a requested target to show up before retrying.
const ACK_TIMEOUT: u64 = 150;

impl Bot {
    pub fn new(config: BotConfig, session: &Session, seed: u64) -> Result<Self, BotError> {
        config.validate()?;
        let run = session.trial().ok_or(BotError::Session(SessionError::NoActiveTrial))?;
        let oracle = OraclePath::new(&run.grid, &session.config.sim).map_err(BotError::NoRoute)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0B07);
        let mut direct = DirectParams::default();
        direct.heading_gain *= rng.gen_range(0.9..1.1);
        direct.latency_margin *= rng.gen_range(0.9..1.1);
        let reaction = config.reaction_delay * rng.gen_range(0.8..1.2);
        Ok(Self {
            config,
            direct,
            goal: run.grid.goal_center,
            goal_radius: run.grid.goal_radius,
            oracle,
            reaction_ticks: session.config.sim.ticks_for(reaction) as usize,
            seen: VecDeque::new(),
            last_input: None,
            probe: None,
            latency: None,
            pending: None,
            switch_sent: None,
            current_s: 0.0,
            responder: StimulusResponder::new(seed),
        })
    }

    pub fn oracle(&self) -> &OraclePath {
        &self.oracle
    }

    /// Commands to submit before the next tick.
    pub fn act(&mut self, session: &Session) -> Vec<WireCommand> {
        let Some(run) = session.trial() else { return Vec::new() };
        let Some(latest) = session.last_frame() else { return Vec::new() };
        let tick = run.tick();
        let mut out = Vec::new();
        if let Some(cmd) = self.responder.act(latest, tick, session.config.sim.dt) {
            out.push(cmd);
        }
        if self.seen.back().map_or(true, |f| f.robot.tick != latest.robot.tick) {
            self.seen.push_back(latest.clone());
        }
        while self.seen.len() > self.reaction_ticks + 1 {
            self.seen.pop_front();
        }
        if self.seen.len() <= self.reaction_ticks && self.reaction_ticks > 0 {
            return out;
        }
        let observed = self.seen.front().expect("non-empty").clone();
        let method = observed.robot.active_method;
        match (self.config.kind, method) {
            (BotKind::DirectBot, ControlMethod::Waypoint) | (BotKind::WaypointBot, ControlMethod::Direct) => {
                let want = match self.config.kind {
                    BotKind::DirectBot => ControlMethod::Direct,
                    BotKind::WaypointBot => ControlMethod::Waypoint,
                };
                if self.switch_sent.is_some_and(|t| tick > t + ACK_TIMEOUT) {
                    self.switch_sent = None;
                }
                if run.spec.control == ControlMode::Switchable && self.switch_sent.is_none() {
                    out.push(WireCommand::SwitchMethod { method: want });
                    self.switch_sent = Some(tick);
                }
            }
            (BotKind::DirectBot, _) => {
                let dt = session.config.sim.dt;
                if let (Some(sent), None) = (self.probe, self.latency) {
                    let r = &observed.robot;
                    if r.linear_vel != 0.0 || r.angular_vel != 0.0 {
                        self.latency = Some((tick - sent) as f64 * dt);
                    }
                }
                let mut params = self.direct;
                if let Some(lat) = self.latency {
                    let omega_max = session.config.sim.omega_max;
                    params.heading_gain = params.heading_gain.min(params.latency_margin / (omega_max * lat));
                }
                let input = direct_bot_step(&observed, &self.oracle, &self.goal, self.goal_radius, &params);
                if self.probe.is_none() && !input.is_zero() {
                    self.probe = Some(tick);
                }
                if self.last_input != Some(input) {
                    self.last_input = Some(input);
                    out.push(WireCommand::Drive(input));
                }
            }
            (BotKind::WaypointBot, _) => out.extend(self.waypoint_act(&observed, &run.costmap, &session.config.arc, tick)),
        }
        out
    }

    fn waypoint_act(&mut self, observed: &StateFrame, costmap: &Costmap, arc: &ArcConfig, tick: u64) -> Vec<WireCommand> {
        let here = observed.robot.pose.position();
        let nav = observed.robot.nav_target;
        if let Some((s, sent)) = self.pending {
            let acked = nav.is_some_and(|t| t.distance(&self.oracle.at(s)) < 0.05);
            if acked {
                self.current_s = s;
                self.pending = None;
            } else if tick > sent + ACK_TIMEOUT {
                self.pending = None;
            } else {
                return Vec::new();
            }
        }
        let navigating = observed.robot.selection.mode() == SelectionMode::Navigating;
        let (from_s, min_step) = match nav {
            Some(t) if navigating => {
                if self.current_s >= self.oracle.length() || here.distance(&t) > HANDOFF_DISTANCE {
                    return Vec::new();
                }
                (self.current_s, self.config.waypoint_spacing / 2.0)
            }
            _ => (self.oracle.project(&here), 0.25),
        };
        let spacing = self.config.waypoint_spacing;
        match waypoint_bot_step(observed, from_s, min_step, &self.oracle, costmap, arc, spacing) {
            Some((s, cmds)) => {
                self.pending = Some((s, tick));
                cmds.to_vec()
            }
            None => Vec::new(),
        }
    }
}

/// Drives the running trial to completion with `bot`.
pub fn run_bot_trial(session: &mut Session, bot: &mut Bot, max_ticks: u64) -> Result<TrialResult, BotError> {
    for _ in 0..max_ticks {
        if !session.is_trial_running() {
            break;
        }
        for cmd in bot.act(session) {
            match session.submit(cmd) {
                Ok(_) | Err(SessionError::AlreadyAnswered) | Err(SessionError::NoActiveStimulus) => {}
                Err(e) => return Err(e.into()),
            }
        }
        session.tick()?;
    }
    if session.is_trial_running() {
        return Err(BotError::Timeout(max_ticks));
    }
    Ok(session.results().last().cloned().expect("trial finished"))
}

/// Tick budget for one bot trial.
pub const BOT_TICK_LIMIT: u64 = 50 * 600;

/// Single-trial plan for a bot run.
pub fn bot_trial_plan(kind: BotKind, delay: f64, variant: MapVariant, seed: u64) -> ExperimentPlan {
    let control = match kind {
        BotKind::DirectBot => ControlMode::Direct,
        BotKind::WaypointBot => ControlMode::Waypoint,
    };
    ExperimentPlan {
        participant_id: format!("bot-{seed}"),
        order: Order::DCFirst,
        trials: vec![TrialSpec {
            control,
            delay,
            map_variant: variant,
            bonus: false,
        }],
        rng_seed: seed,
    }
}

/// Runs one bot on one trial of `base_map` and returns the finished session.
pub fn run_single(
    kind: BotKind,
    delay: f64,
    seed: u64,
    base_map: &OccupancyGrid,
    config: SessionConfig,
) -> Result<Session, BotError> {
    let variant = [
        MapVariant::Forward,
        MapVariant::Reverse,
        MapVariant::ForwardMirrored,
        MapVariant::ReverseMirrored,
    ][(seed % 4) as usize];
    let mut session = Session::new(bot_trial_plan(kind, delay, variant, seed), base_map.clone(), config);
    session.start_next_trial()?;
    let mut bot = Bot::new(BotConfig::new(kind), &session, seed)?;
    run_bot_trial(&mut session, &mut bot, BOT_TICK_LIMIT)?;
    Ok(session)
}

/// Runs every trial of `session`'s plan, choosing the bot by trial control.
pub fn run_bot_session(session: &mut Session, seed: u64) -> Result<(), BotError> {
    while !session.is_finished() {
        let index = session.start_next_trial()?;
        let kind = match session.plan.trials[index].control {
            ControlMode::Direct => BotKind::DirectBot,
            ControlMode::Waypoint | ControlMode::Switchable => BotKind::WaypointBot,
        };
        let mut bot = Bot::new(BotConfig::new(kind), session, seed.wrapping_add(index as u64))?;
        run_bot_trial(session, &mut bot, BOT_TICK_LIMIT)?;
    }
    Ok(())
}
