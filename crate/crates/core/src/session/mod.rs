//! Experiment engine: runs the planned trials one tick at a time, routes
//! operator commands through the delayed links, scores the arrow task and
//! records everything needed to replay a session.

pub mod log;
pub mod plan;
pub mod results;
pub mod stimuli;

pub use log::{EventLog, EventRecord, LogError};
pub use plan::{build_plan, ControlMode, ExperimentPlan, Order, TrialSpec};
pub use results::{results_csv, TrialResult, RESULTS_HEADER};
pub use stimuli::{record_response, schedule_stimuli, StimulusError, StimulusEvent, StimulusSchedule};

use crate::channel::{ChannelConfig, DelayChannel};
use crate::geometry::Point2D;
use crate::map::OccupancyGrid;
use crate::planner::{self, inflate, Costmap, FollowStatus, Path, PlanError, PlannerConfig};
use crate::selection::{ArcConfig, SelectionState};
use crate::sim::{apply_direct_control, step, DriveInput, RobotState, SimConfig, VelocityCommand};
use crate::wire::{
    ActiveStimulus, ControlMethod, ResponseAck, RobotFrame, StateFrame, TrialPhase, WireCommand,
};
use log::kind;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Duration;
use thiserror::Error;

/// Ticks between state checkpoints in the event log.
pub const CHECKPOINT_EVERY: u64 = 50;

/// Questionnaires prompted after each regular trial.
pub const INSTRUMENTS: [&str; 2] = ["SUS", "TLX"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub sim: SimConfig,
    pub arc: ArcConfig,
    pub planner: PlannerConfig,
    /// Link used for delayed trials and after the bonus-round onset.
    pub delayed_link: ChannelConfig,
}

impl SessionConfig {
    pub fn new(sim: SimConfig, resolution: f64) -> Self {
        Self {
            sim,
            arc: ArcConfig::default(),
            planner: PlannerConfig::for_robot(&sim, resolution),
            delayed_link: ChannelConfig::preset(Duration::from_secs(1)),
        }
    }

    pub fn for_map(grid: &OccupancyGrid) -> Self {
        Self::new(SimConfig::default(), grid.resolution)
    }

    pub fn tick_duration(&self) -> Duration {
        Duration::from_nanos((self.sim.dt * 1e9).round() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SessionError {
    #[error("method switching is only available in the bonus trial")]
    NotBonusTrial,
    #[error("no trial is running")]
    NoActiveTrial,
    #[error("the current trial has not finished")]
    TrialInProgress,
    #[error("every planned trial has been run")]
    NoMoreTrials,
    #[error("no stimulus is showing")]
    NoActiveStimulus,
    #[error("stimulus already answered")]
    AlreadyAnswered,
    #[error("controller pose is malformed")]
    InvalidPose,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn link(cfg: &ChannelConfig) -> (DelayChannel<WireCommand>, DelayChannel<RobotFrame>) {
    match cfg.jitter {
        Some(j) => (
            DelayChannel::with_jitter(cfg.uplink_delay, j),
            DelayChannel::with_jitter(
                cfg.downlink_delay,
                crate::channel::Jitter {
                    seed: j.seed.wrapping_add(1),
                    ..j
                },
            ),
        ),
        None => (DelayChannel::new(cfg.uplink_delay), DelayChannel::new(cfg.downlink_delay)),
    }
}

/// Everything that changes while one trial runs.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub index: usize,
    pub spec: TrialSpec,
    pub grid: OccupancyGrid,
    pub costmap: Costmap,
    pub robot: RobotState,
    pub selection: SelectionState,
    pub path: Option<Path>,
    pub active_method: ControlMethod,
    pub phase: TrialPhase,
    pub plan_error: Option<PlanError>,
    pub distance: f64,
    /// Steps whose translation was rejected by the collision check.
    pub collision_ticks: u64,
    pub delay_onset: Option<f64>,
    pub stimuli: Vec<StimulusEvent>,
    pub last_response: Option<ResponseAck>,
    tick: u64,
    input: DriveInput,
    uplink: DelayChannel<WireCommand>,
    downlink: DelayChannel<RobotFrame>,
    schedule: StimulusSchedule,
    /// Index of the showing stimulus, until the next one spawns.
    showing: Option<usize>,
    usage_ticks: BTreeMap<ControlMethod, u64>,
    start_side: bool,
    frames: Sha256,
    frames_hash: Option<String>,
}

impl TrialRun {
    /// Ticks stepped so far in this trial.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn uplink_delay(&self) -> Duration {
        self.uplink.delay()
    }

    pub fn downlink_delay(&self) -> Duration {
        self.downlink.delay()
    }

    pub fn active_stimulus(&self) -> Option<(usize, &StimulusEvent)> {
        self.showing
            .map(|i| (i, &self.stimuli[i]))
            .filter(|(_, e)| e.response_time.is_none())
    }

    /// SHA-256 of every frame delivered to the operator, once the trial is over.
    pub fn frames_hash(&self) -> Option<&str> {
        self.frames_hash.as_deref()
    }

    pub fn state_hash(&self) -> String {
        let snapshot = json!({
            "tick": self.tick,
            "robot": self.robot,
            "selection": self.selection,
            "path": self.path.as_ref().map(|p| &p.waypoints),
            "method": self.active_method,
            "distance": self.distance,
            "input": self.input,
        });
        hex(&Sha256::digest(snapshot.to_string().as_bytes()))
    }

    fn robot_frame(&self, sim: &SimConfig) -> RobotFrame {
        RobotFrame {
            tick: self.tick,
            t: self.tick as f64 * sim.dt,
            pose: self.robot.pose,
            linear_vel: self.robot.linear_vel,
            angular_vel: self.robot.angular_vel,
            proximity_warning: self.robot.proximity_blocked,
            selection: self.selection,
            nav_target: self.path.as_ref().map(|p| p.goal()),
            path: self.path.as_ref().map(|p| p.waypoints.clone()).unwrap_or_default(),
            active_method: self.active_method,
            phase: self.phase,
            plan_error: self.plan_error,
        }
    }

    fn overlay(&self, robot: RobotFrame) -> StateFrame {
        let scores_due = if self.phase == TrialPhase::Complete && !self.spec.bonus {
            INSTRUMENTS.iter().map(|s| s.to_string()).collect()
        } else {
            Vec::new()
        };
        StateFrame {
            trial: self.index,
            robot,
            stimuli: self
                .active_stimulus()
                .map(|(id, e)| ActiveStimulus {
                    id,
                    direction: e.direction,
                    spawn_time: e.spawn_time,
                })
                .into_iter()
                .collect(),
            last_response: self.last_response,
            delay_onset: self.delay_onset,
            scores_due,
        }
    }

    fn result(&self, sim: &SimConfig) -> TrialResult {
        let usage_seconds = if self.spec.bonus {
            self.usage_ticks
                .iter()
                .map(|(m, t)| (*m, *t as f64 * sim.dt))
                .collect()
        } else {
            BTreeMap::new()
        };
        TrialResult {
            trial: self.index,
            spec: self.spec,
            completion_time: self.tick as f64 * sim.dt,
            distance_travelled: self.distance,
            responses: self.stimuli.clone(),
            errors_count: self.stimuli.iter().filter(|e| e.correct == Some(false)).count() as u32,
            usage_seconds,
        }
    }
}

/// Nearest traversable cell centre to `p`, searching outward ring by ring.
fn nearest_traversable(costmap: &Costmap, p: &Point2D, max_ring: i64) -> Option<Point2D> {
    let (cx, cy) = costmap.cell_of(p);
    for r in 1..=max_ring {
        let mut best: Option<(f64, Point2D)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                if costmap.traversable(cx + dx, cy + dy) {
                    let c = costmap.cell_center(cx + dx, cy + dy);
                    let d = c.distance(p);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
        }
        if let Some((_, c)) = best {
            return Some(c);
        }
    }
    None
}

/// Plans from the robot position, starting from the closest free cell when the
/// robot sits inside the inflation band.
pub fn plan_from(costmap: &Costmap, from: Point2D, goal: Point2D) -> Result<Path, PlanError> {
    match planner::plan(costmap, from, goal) {
        Err(PlanError::StartBlocked) => {
            let start = nearest_traversable(costmap, &from, 8).ok_or(PlanError::StartBlocked)?;
            let path = planner::plan(costmap, start, goal)?;
            let mut pts = Vec::with_capacity(path.waypoints.len() + 1);
            pts.push(from);
            pts.extend(path.waypoints);
            Ok(Path::from_waypoints(pts, path.grid_cost))
        }
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub plan: ExperimentPlan,
    pub config: SessionConfig,
    base_map: OccupancyGrid,
    trial: Option<TrialRun>,
    next_trial: usize,
    results: Vec<TrialResult>,
    log: EventLog,
    /// Ticks stepped across all trials; drives the log clock.
    global_tick: u64,
    last_frame: Option<StateFrame>,
}

impl Session {
    pub fn new(plan: ExperimentPlan, base_map: OccupancyGrid, config: SessionConfig) -> Self {
        Self {
            plan,
            config,
            base_map,
            trial: None,
            next_trial: 0,
            results: Vec::new(),
            log: EventLog::new(),
            global_tick: 0,
            last_frame: None,
        }
    }

    pub fn base_map(&self) -> &OccupancyGrid {
        &self.base_map
    }

    pub fn trial(&self) -> Option<&TrialRun> {
        self.trial.as_ref()
    }

    pub fn results(&self) -> &[TrialResult] {
        &self.results
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    /// Latest frame delivered to the operator.
    pub fn last_frame(&self) -> Option<&StateFrame> {
        self.last_frame.as_ref()
    }

    /// Index of the trial that `start_next_trial` would begin.
    pub fn next_trial_index(&self) -> usize {
        self.next_trial
    }

    pub fn is_trial_running(&self) -> bool {
        self.trial.as_ref().is_some_and(|t| t.phase == TrialPhase::Running)
    }

    /// All planned trials are finished.
    pub fn is_finished(&self) -> bool {
        !self.is_trial_running() && self.next_trial >= self.plan.trials.len()
    }

    fn now(&self) -> f64 {
        (self.config.tick_duration() * self.global_tick as u32).as_secs_f64()
    }

    pub fn results_csv(&self) -> String {
        results_csv(&self.plan, &self.results)
    }

    /// Hash over the finished results and the state of the latest trial.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(&self.results).expect("results serialize"));
        if let Some(t) = &self.trial {
            h.update(t.state_hash());
        }
        hex(&h.finalize())
    }

    /// Records free-form annotations such as questionnaire submissions.
    pub fn annotate(&mut self, kind: &str, data: Value) {
        let t = self.now();
        self.log.push(t, kind, data);
    }

    /// Logs the running trial's state so that a replay can stop at this tick.
    pub fn checkpoint(&mut self) {
        let t = self.now();
        if let Some(run) = self.trial.as_ref().filter(|r| r.phase == TrialPhase::Running) {
            let data = json!({ "trial": run.index, "tick": run.tick, "state_hash": run.state_hash(), "suspend": true });
            self.log.push(t, kind::CHECKPOINT, data);
        }
    }

    /// Appends the bonus round to the plan.
    pub fn add_bonus(&mut self) -> bool {
        if self.plan.has_bonus() {
            return false;
        }
        self.plan.add_bonus();
        let t = self.now();
        self.log.push(t, kind::BONUS_ADDED, json!({ "trial": self.plan.trials.len() - 1 }));
        true
    }

    pub fn start_next_trial(&mut self) -> Result<usize, SessionError> {
        if self.is_trial_running() {
            return Err(SessionError::TrialInProgress);
        }
        let index = self.next_trial;
        let spec = *self.plan.trials.get(index).ok_or(SessionError::NoMoreTrials)?;
        let grid = spec.map_variant.apply(&self.base_map);
        let costmap = inflate(&grid, self.config.planner.inflation_radius);
        let link_cfg = if spec.delay > 0.0 {
            self.config.delayed_link
        } else {
            ChannelConfig::NO_DELAY
        };
        let (uplink, downlink) = link(&link_cfg);
        let active_method = match spec.control {
            ControlMode::Direct => ControlMethod::Direct,
            ControlMode::Waypoint => ControlMethod::Waypoint,
            ControlMode::Switchable => match self.plan.order {
                Order::DCFirst => ControlMethod::Direct,
                Order::WCFirst => ControlMethod::Waypoint,
            },
        };
        let seed = self.plan.trial_seed(index);
        let robot = RobotState::at_rest(grid.start_pose, &grid, &self.config.sim);
        let start_side = robot.pose.x < grid.midline_x;
        let run = TrialRun {
            index,
            spec,
            costmap,
            robot,
            selection: SelectionState::Idle,
            path: None,
            active_method,
            phase: TrialPhase::Running,
            plan_error: None,
            distance: 0.0,
            collision_ticks: 0,
            delay_onset: None,
            stimuli: Vec::new(),
            last_response: None,
            tick: 0,
            input: DriveInput::default(),
            uplink,
            downlink,
            schedule: StimulusSchedule::new(seed, self.config.sim.dt),
            showing: None,
            usage_ticks: BTreeMap::new(),
            start_side,
            frames: Sha256::new(),
            frames_hash: None,
            grid,
        };
        let t = self.now();
        self.log.push(
            t,
            kind::TRIAL_START,
            json!({
                "trial": index,
                "spec": spec,
                "stimulus_seed": seed,
                "uplink_delay": link_cfg.uplink_delay.as_secs_f64(),
                "downlink_delay": link_cfg.downlink_delay.as_secs_f64(),
                "method": active_method,
            }),
        );
        self.last_frame = Some(run.overlay(run.robot_frame(&self.config.sim)));
        self.trial = Some(run);
        self.next_trial += 1;
        Ok(index)
    }

    /// Accepts an operator command at the current sim time. Stimulus responses
    /// are scored immediately at the operator station; everything else enters
    /// the uplink.
    pub fn submit(&mut self, cmd: WireCommand) -> Result<Option<ResponseAck>, SessionError> {
        let t = self.now();
        let dt = self.config.sim.dt;
        let run = self.trial.as_mut().filter(|r| r.phase == TrialPhase::Running);
        let run = run.ok_or(SessionError::NoActiveTrial)?;
        match cmd {
            WireCommand::SwitchMethod { .. } if !run.spec.bonus => return Err(SessionError::NotBonusTrial),
            WireCommand::AimUpdate(pose) if pose.validate().is_err() => return Err(SessionError::InvalidPose),
            _ => {}
        }
        let tick = run.tick;
        let mut ack = None;
        let mut response_record = None;
        if let WireCommand::StimulusResponse { button } = cmd {
            let id = run.showing.ok_or(SessionError::NoActiveStimulus)?;
            let now = tick as f64 * dt;
            let answered = record_response(&run.stimuli[id], button, now).map_err(|e| match e {
                StimulusError::AlreadyAnswered => SessionError::AlreadyAnswered,
                StimulusError::BeforeSpawn => SessionError::NoActiveStimulus,
            })?;
            run.stimuli[id] = answered;
            let a = ResponseAck {
                stimulus: id,
                correct: answered.correct == Some(true),
                response_time: answered.reaction().unwrap_or(0.0),
            };
            run.last_response = Some(a);
            ack = Some(a);
            response_record = Some(json!({
                "trial": run.index,
                "tick": tick,
                "stimulus": id,
                "button": button,
                "correct": a.correct,
                "rt": a.response_time,
            }));
        } else {
            let now = self.config.tick_duration() * tick as u32;
            run.uplink.send(cmd, now).expect("trial clock is monotone");
        }
        let index = run.index;
        self.log.push(t, kind::COMMAND, json!({ "trial": index, "tick": tick, "cmd": cmd }));
        if let Some(r) = response_record {
            self.log.push(t, kind::RESPONSE, r);
        }
        Ok(ack)
    }

    /// Advances the running trial by one step and returns the frames the
    /// operator receives at the new time.
    pub fn tick(&mut self) -> Result<Vec<StateFrame>, SessionError> {
        if !self.is_trial_running() {
            return Err(SessionError::NoActiveTrial);
        }
        let cfg = self.config;
        let sim = cfg.sim;
        let t_before = self.now();
        let run = self.trial.as_mut().expect("checked above");
        let mut records: Vec<(f64, &'static str, Value)> = Vec::new();

        let now = self.config.tick_duration() * run.tick as u32;
        for cmd in run.uplink.poll(now).expect("trial clock is monotone") {
            Self::apply(run, cmd, &cfg, t_before, &mut records);
        }

        let vel = match run.active_method {
            ControlMethod::Direct => apply_direct_control(run.input, run.robot.proximity_blocked, &sim),
            ControlMethod::Waypoint => match &run.path {
                Some(path) => {
                    let (v, status) = planner::follow(path, &run.robot, &sim, &cfg.planner.follower);
                    if status == FollowStatus::Arrived {
                        run.path = None;
                        run.selection = run.selection.arrive();
                    }
                    v
                }
                None => VelocityCommand::STOP,
            },
        };
        let before = run.robot.position();
        run.robot = step(&run.robot, vel, &run.grid, &sim);
        run.robot.tick = run.tick + 1;
        run.tick += 1;
        run.distance += before.distance(&run.robot.position());
        run.collision_ticks += run.robot.collision_clamped as u64;
        *run.usage_ticks.entry(run.active_method).or_insert(0) += 1;
        self.global_tick += 1;
        let t = (cfg.tick_duration() * self.global_tick as u32).as_secs_f64();
        let trial_t = run.tick as f64 * sim.dt;

        if let Some(ev) = run.schedule.poll(run.tick) {
            run.stimuli.push(ev);
            let id = run.stimuli.len() - 1;
            run.showing = Some(id);
            records.push((
                t,
                kind::STIMULUS,
                json!({ "trial": run.index, "tick": run.tick, "id": id, "direction": ev.direction, "spawn_time": ev.spawn_time }),
            ));
        }

        if run.spec.bonus && run.delay_onset.is_none() && (run.robot.pose.x < run.grid.midline_x) != run.start_side {
            run.uplink.set_delay(cfg.delayed_link.uplink_delay);
            run.downlink.set_delay(cfg.delayed_link.downlink_delay);
            run.delay_onset = Some(trial_t);
            records.push((
                t,
                kind::DELAY_CHANGE,
                json!({
                    "trial": run.index,
                    "tick": run.tick,
                    "uplink_delay": cfg.delayed_link.uplink_delay.as_secs_f64(),
                    "downlink_delay": cfg.delayed_link.downlink_delay.as_secs_f64(),
                }),
            ));
        }

        let complete = run.robot.position().distance(&run.grid.goal_center) <= run.grid.goal_radius;
        if complete {
            run.phase = TrialPhase::Complete;
            run.path = None;
            run.selection = SelectionState::Idle;
        }
        if run.tick % CHECKPOINT_EVERY == 0 {
            records.push((
                t,
                kind::CHECKPOINT,
                json!({ "trial": run.index, "tick": run.tick, "state_hash": run.state_hash() }),
            ));
        }

        let frame_time = cfg.tick_duration() * run.tick as u32;
        let frame = run.robot_frame(&sim);
        run.downlink.send(frame, frame_time).expect("trial clock is monotone");
        let delivered = if complete {
            run.downlink.poll(Duration::MAX).expect("flush")
        } else {
            run.downlink.poll(frame_time).expect("trial clock is monotone")
        };
        let frames: Vec<StateFrame> = delivered.into_iter().map(|f| run.overlay(f)).collect();
        for f in &frames {
            run.frames.update(serde_json::to_vec(f).expect("frames serialize"));
            run.frames.update(b"\n");
        }

        if complete {
            let frames_hash = hex(&run.frames.clone().finalize());
            run.frames_hash = Some(frames_hash.clone());
            let result = run.result(&sim);
            records.push((
                t,
                kind::TRIAL_COMPLETE,
                json!({
                    "trial": run.index,
                    "tick": run.tick,
                    "completion_time": result.completion_time,
                    "distance": result.distance_travelled,
                    "errors": result.errors_count,
                    "frames_hash": frames_hash,
                    "state_hash": run.state_hash(),
                }),
            ));
            self.results.push(result);
        }
        for (t, k, d) in records {
            self.log.push(t, k, d);
        }
        if let Some(f) = frames.last() {
            self.last_frame = Some(f.clone());
        }
        Ok(frames)
    }

    fn apply(
        run: &mut TrialRun,
        cmd: WireCommand,
        cfg: &SessionConfig,
        t: f64,
        records: &mut Vec<(f64, &'static str, Value)>,
    ) {
        let waypoint = run.active_method == ControlMethod::Waypoint;
        match cmd {
            WireCommand::Drive(input) => {
                if run.active_method == ControlMethod::Direct {
                    run.input = input;
                }
            }
            WireCommand::AimBegin if waypoint => {
                if let Ok(s) = run.selection.begin_aim() {
                    run.selection = s;
                }
            }
            WireCommand::AimUpdate(pose) if waypoint => {
                if let Ok(s) = run.selection.update_aim(&pose, &run.costmap, &cfg.arc) {
                    run.selection = s;
                }
            }
            WireCommand::AimRelease if waypoint => {
                if let Ok(s) = run.selection.release_aim() {
                    run.selection = s;
                }
            }
            WireCommand::Confirm if waypoint => {
                if let Ok((s, req)) = run.selection.confirm() {
                    match plan_from(&run.costmap, run.robot.position(), req.target) {
                        Ok(path) => {
                            run.selection = s;
                            run.path = Some(path);
                            run.plan_error = None;
                        }
                        Err(e) => {
                            run.selection = SelectionState::Idle;
                            run.plan_error = Some(e);
                        }
                    }
                }
            }
            WireCommand::StopGrip => {
                run.selection = run.selection.stop().0;
                run.path = None;
                run.input = DriveInput::default();
                run.robot.linear_vel = 0.0;
                run.robot.angular_vel = 0.0;
            }
            WireCommand::SwitchMethod { method } => {
                if method != run.active_method {
                    records.push((
                        t,
                        kind::METHOD_SWITCH,
                        json!({ "trial": run.index, "tick": run.tick, "from": run.active_method, "to": method }),
                    ));
                    run.active_method = method;
                    run.selection = SelectionState::Idle;
                    run.path = None;
                    run.input = DriveInput::default();
                    run.robot.linear_vel = 0.0;
                    run.robot.angular_vel = 0.0;
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("record {index}: malformed {kind} record")]
    Malformed { index: usize, kind: String },
    #[error("record {index}: {source}")]
    Session {
        index: usize,
        #[source]
        source: SessionError,
    },
    #[error("record {index}: trial {trial} did not finish by tick {tick}")]
    Diverged { index: usize, trial: usize, tick: u64 },
}

fn field<T: serde::de::DeserializeOwned>(rec: &EventRecord, name: &str, index: usize) -> Result<T, ReplayError> {
    rec.data
        .get(name)
        .cloned()
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or_else(|| ReplayError::Malformed {
            index,
            kind: rec.kind.clone(),
        })
}

fn advance_to(session: &mut Session, tick: u64, index: usize) -> Result<(), ReplayError> {
    while session.trial.as_ref().is_some_and(|t| t.tick < tick && t.phase == TrialPhase::Running) {
        session.tick().map_err(|source| ReplayError::Session { index, source })?;
    }
    Ok(())
}

/// Rebuilds a session by re-feeding the recorded operator inputs at their
/// recorded ticks.
pub fn replay(
    plan: ExperimentPlan,
    base_map: OccupancyGrid,
    config: SessionConfig,
    log: &EventLog,
) -> Result<Session, ReplayError> {
    let mut base_plan = plan;
    if log.records().iter().any(|r| r.kind == kind::BONUS_ADDED) {
        base_plan.trials.retain(|t| !t.bonus);
    }
    let mut s = Session::new(base_plan, base_map, config);
    let mut last_tick = 0;
    for (index, rec) in log.records().iter().enumerate() {
        match rec.kind.as_str() {
            kind::TRIAL_START => {
                s.start_next_trial().map_err(|source| ReplayError::Session { index, source })?;
                last_tick = 0;
            }
            kind::COMMAND => {
                let tick: u64 = field(rec, "tick", index)?;
                let cmd: WireCommand = field(rec, "cmd", index)?;
                advance_to(&mut s, tick, index)?;
                s.submit(cmd).map_err(|source| ReplayError::Session { index, source })?;
                last_tick = tick;
            }
            kind::CHECKPOINT if rec.data.get("suspend").is_some() => {
                let tick: u64 = field(rec, "tick", index)?;
                advance_to(&mut s, tick, index)?;
                s.checkpoint();
                last_tick = tick;
            }
            kind::CHECKPOINT | kind::STIMULUS | kind::DELAY_CHANGE | kind::METHOD_SWITCH => {
                last_tick = last_tick.max(field(rec, "tick", index)?);
            }
            kind::TRIAL_COMPLETE => {
                let tick: u64 = field(rec, "tick", index)?;
                let trial: usize = field(rec, "trial", index)?;
                advance_to(&mut s, tick, index)?;
                if s.is_trial_running() {
                    return Err(ReplayError::Diverged { index, trial, tick });
                }
            }
            kind::BONUS_ADDED => {
                s.add_bonus();
            }
            kind::RESPONSE => {}
            other => s.annotate(other, rec.data.clone()),
        }
    }
    // an unfinished trial is replayed up to its last recorded tick
    if s.is_trial_running() {
        advance_to(&mut s, last_tick, log.len())?;
    }
    Ok(s)
}
