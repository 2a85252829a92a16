//! Ancillary left/right arrow task: seeded schedule and response scoring.

use crate::wire::Direction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inter-stimulus gap bounds in seconds.
pub const GAP_MIN: f64 = 7.0;
pub const GAP_MAX: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    pub direction: Direction,
    /// Seconds since trial start.
    pub spawn_time: f64,
    pub response_time: Option<f64>,
    pub correct: Option<bool>,
}

impl StimulusEvent {
    pub fn new(direction: Direction, spawn_time: f64) -> Self {
        Self {
            direction,
            spawn_time,
            response_time: None,
            correct: None,
        }
    }

    /// Reaction time, when answered.
    pub fn reaction(&self) -> Option<f64> {
        self.response_time.map(|t| t - self.spawn_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StimulusError {
    #[error("stimulus already answered")]
    AlreadyAnswered,
    #[error("response precedes the stimulus")]
    BeforeSpawn,
}

/// Answers `event` with `button` at `now`.
pub fn record_response(
    event: &StimulusEvent,
    button: Direction,
    now: f64,
) -> Result<StimulusEvent, StimulusError> {
    if event.response_time.is_some() {
        return Err(StimulusError::AlreadyAnswered);
    }
    if now < event.spawn_time {
        return Err(StimulusError::BeforeSpawn);
    }
    Ok(StimulusEvent {
        response_time: Some(now),
        correct: Some(button == event.direction),
        ..*event
    })
}

/// Endless seeded stream of stimuli on the tick grid.
#[derive(Debug, Clone)]
pub struct StimulusSchedule {
    rng: ChaCha8Rng,
    dt: f64,
    next_tick: u64,
    next_direction: Direction,
}

impl StimulusSchedule {
    pub fn new(seed: u64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = Self::draw_gap(&mut rng, dt);
        let next_direction = Self::draw_direction(&mut rng);
        Self {
            rng,
            dt,
            next_tick: first,
            next_direction,
        }
    }

    fn draw_gap(rng: &mut ChaCha8Rng, dt: f64) -> u64 {
        let lo = (GAP_MIN / dt).round() as u64;
        let hi = (GAP_MAX / dt).round() as u64;
        rng.gen_range(lo..=hi)
    }

    fn draw_direction(rng: &mut ChaCha8Rng) -> Direction {
        if rng.gen_bool(0.5) {
            Direction::Left
        } else {
            Direction::Right
        }
    }

    /// Trial tick (counted from 0) of the next stimulus.
    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }

    /// Returns the stimulus due at `tick`, if any, and schedules the following one.
    pub fn poll(&mut self, tick: u64) -> Option<StimulusEvent> {
        if tick < self.next_tick {
            return None;
        }
        let event = StimulusEvent::new(self.next_direction, self.next_tick as f64 * self.dt);
        self.next_tick += Self::draw_gap(&mut self.rng, self.dt);
        self.next_direction = Self::draw_direction(&mut self.rng);
        Some(event)
    }
}

/// Every stimulus that spawns within `duration` seconds for this seed.
pub fn schedule_stimuli(duration: f64, seed: u64, dt: f64) -> Vec<StimulusEvent> {
    let mut schedule = StimulusSchedule::new(seed, dt);
    let mut out = Vec::new();
    while schedule.next_tick() as f64 * dt <= duration {
        let tick = schedule.next_tick();
        out.extend(schedule.poll(tick));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.02;

    #[test]
    fn seeded_schedule_is_reproducible() {
        assert_eq!(schedule_stimuli(120.0, 5, DT), schedule_stimuli(120.0, 5, DT));
        assert_ne!(schedule_stimuli(120.0, 5, DT), schedule_stimuli(120.0, 6, DT));
    }

    #[test]
    fn eighty_second_trial() {
        for seed in 0..200 {
            let s = schedule_stimuli(80.0, seed, DT);
            assert!((8..=11).contains(&s.len()), "seed {seed}: {}", s.len());
            assert!(s[0].spawn_time >= 7.0 && s[0].spawn_time <= 9.0);
            for w in s.windows(2) {
                let gap = w[1].spawn_time - w[0].spawn_time;
                assert!((7.0 - 1e-9..=9.0 + 1e-9).contains(&gap), "gap {gap}");
            }
        }
    }

    #[test]
    fn short_trial_has_no_stimuli() {
        for seed in 0..50 {
            assert!(schedule_stimuli(5.0, seed, DT).is_empty());
        }
    }

    #[test]
    fn responses() {
        let e = StimulusEvent::new(Direction::Left, 10.0);
        let r = record_response(&e, Direction::Left, 10.6).unwrap();
        assert_eq!(r.correct, Some(true));
        assert!((r.reaction().unwrap() - 0.6).abs() < 1e-12);
        let w = record_response(&e, Direction::Right, 11.0).unwrap();
        assert_eq!(w.correct, Some(false));
        assert_eq!(record_response(&r, Direction::Left, 12.0), Err(StimulusError::AlreadyAnswered));
        assert_eq!(record_response(&e, Direction::Left, 9.0), Err(StimulusError::BeforeSpawn));
    }

    #[test]
    fn both_directions_occur() {
        let s = schedule_stimuli(2000.0, 3, DT);
        let left = s.iter().filter(|e| e.direction == Direction::Left).count();
        assert!(left > s.len() / 4 && left < 3 * s.len() / 4);
    }
}
