//! Order-preserving delayed link between operator and robot.
//!
//! Times are sim-clock offsets held as [`Duration`] so that `send + delay`
//! lands exactly on the tick grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("clock went backwards: {now:?} after {last:?}")]
    ClockRegression { now: Duration, last: Duration },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub payload: T,
    pub send_time: Duration,
    pub deliver_time: Duration,
}

/// Uniform extra latency in `[0, max]`, drawn from a seeded generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jitter {
    pub max: Duration,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Operator → robot.
    pub uplink_delay: Duration,
    /// Robot → operator.
    pub downlink_delay: Duration,
    #[serde(default)]
    pub jitter: Option<Jitter>,
}

impl ChannelConfig {
    pub const NO_DELAY: ChannelConfig = ChannelConfig {
        uplink_delay: Duration::ZERO,
        downlink_delay: Duration::ZERO,
        jitter: None,
    };

    /// The experiment preset: the whole delay on the command uplink.
    pub fn preset(delay: Duration) -> Self {
        Self {
            uplink_delay: delay,
            ..Self::NO_DELAY
        }
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::NO_DELAY
    }
}

#[derive(Debug, Clone)]
pub struct DelayChannel<T> {
    delay: Duration,
    queue: VecDeque<Envelope<T>>,
    last_deliver: Duration,
    last_now: Duration,
    jitter: Option<(Duration, ChaCha8Rng)>,
}

impl<T> DelayChannel<T> {
    pub fn new(delay: Duration) -> Self {
        Self {
            delay,
            queue: VecDeque::new(),
            last_deliver: Duration::ZERO,
            last_now: Duration::ZERO,
            jitter: None,
        }
    }

    pub fn with_jitter(delay: Duration, jitter: Jitter) -> Self {
        Self {
            jitter: Some((jitter.max, ChaCha8Rng::seed_from_u64(jitter.seed))),
            ..Self::new(delay)
        }
    }

    pub fn delay(&self) -> Duration {
        self.delay
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &Envelope<T>> {
        self.queue.iter()
    }

    fn advance_clock(&mut self, now: Duration) -> Result<(), ChannelError> {
        if now < self.last_now {
            return Err(ChannelError::ClockRegression {
                now,
                last: self.last_now,
            });
        }
        self.last_now = now;
        Ok(())
    }

    /// Enqueues `payload`; it becomes deliverable no earlier than anything sent before it.
    pub fn send(&mut self, payload: T, now: Duration) -> Result<Duration, ChannelError> {
        self.advance_clock(now)?;
        let extra = match &mut self.jitter {
            Some((max, rng)) if !max.is_zero() => {
                Duration::from_nanos(rng.gen_range(0..=max.as_nanos() as u64))
            }
            _ => Duration::ZERO,
        };
        let deliver_time = (now + self.delay + extra).max(self.last_deliver);
        self.last_deliver = deliver_time;
        self.queue.push_back(Envelope {
            payload,
            send_time: now,
            deliver_time,
        });
        Ok(deliver_time)
    }

    /// Removes and returns every envelope due at `now`, in send order.
    pub fn poll(&mut self, now: Duration) -> Result<Vec<T>, ChannelError> {
        Ok(self.poll_envelopes(now)?.into_iter().map(|e| e.payload).collect())
    }

    pub fn poll_envelopes(&mut self, now: Duration) -> Result<Vec<Envelope<T>>, ChannelError> {
        self.advance_clock(now)?;
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|e| e.deliver_time <= now) {
            out.extend(self.queue.pop_front());
        }
        Ok(out)
    }

    /// Changes the delay for subsequent sends; in-flight envelopes keep their times.
    pub fn set_delay(&mut self, delay: Duration) {
        self.delay = delay;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn secs(s: f64) -> Duration {
        Duration::from_secs_f64(s)
    }

    #[test]
    fn zero_delay_delivers_immediately() {
        let mut ch = DelayChannel::new(Duration::ZERO);
        ch.send("a", secs(5.0)).unwrap();
        assert_eq!(ch.poll(secs(5.0)).unwrap(), vec!["a"]);
    }

    #[test]
    fn one_second_delay() {
        let mut ch = DelayChannel::new(secs(1.0));
        assert_eq!(ch.send("a", secs(2.0)).unwrap(), secs(3.0));
        assert!(ch.poll(Duration::from_millis(2980)).unwrap().is_empty());
        assert_eq!(ch.poll(secs(3.0)).unwrap(), vec!["a"]);
    }

    #[test]
    fn reducing_delay_never_overtakes() {
        let mut ch = DelayChannel::new(secs(1.0));
        ch.send("A", secs(0.0)).unwrap();
        ch.set_delay(Duration::ZERO);
        assert_eq!(ch.send("B", secs(0.5)).unwrap(), secs(1.0));
        assert!(ch.poll(secs(0.5)).unwrap().is_empty());
        assert_eq!(ch.poll(secs(1.0)).unwrap(), vec!["A", "B"]);
    }

    #[test]
    fn raising_delay_has_no_retro_effect() {
        let mut ch = DelayChannel::new(Duration::ZERO);
        ch.send(1, secs(1.0)).unwrap();
        ch.set_delay(secs(1.0));
        ch.send(2, secs(1.0)).unwrap();
        assert_eq!(ch.poll(secs(1.0)).unwrap(), vec![1]);
        assert_eq!(ch.poll(secs(2.0)).unwrap(), vec![2]);
    }

    #[test]
    fn set_delay_is_idempotent() {
        let mut a = DelayChannel::new(secs(0.5));
        let mut b = DelayChannel::new(secs(0.5));
        a.set_delay(secs(1.0));
        a.set_delay(secs(1.0));
        b.set_delay(secs(1.0));
        assert_eq!(a.send(0, secs(1.0)).unwrap(), b.send(0, secs(1.0)).unwrap());
    }

    #[test]
    fn clock_regression_is_rejected() {
        let mut ch = DelayChannel::new(Duration::ZERO);
        ch.send(1, secs(2.0)).unwrap();
        assert!(matches!(ch.send(2, secs(1.0)), Err(ChannelError::ClockRegression { .. })));
        assert!(matches!(ch.poll(secs(1.5)), Err(ChannelError::ClockRegression { .. })));
        assert_eq!(ch.poll(secs(2.0)).unwrap(), vec![1]);
    }

    #[test]
    fn poll_before_due_is_empty_and_two_due_come_in_order() {
        let mut ch = DelayChannel::new(secs(0.2));
        ch.send('x', secs(0.0)).unwrap();
        ch.send('y', secs(0.1)).unwrap();
        assert!(ch.poll(secs(0.1)).unwrap().is_empty());
        assert_eq!(ch.poll(secs(0.3)).unwrap(), vec!['x', 'y']);
    }

    proptest! {
        #[test]
        fn jittered_delivery_keeps_order(seed in any::<u64>(), gaps in proptest::collection::vec(0u64..50, 1..60)) {
            let mut ch = DelayChannel::with_jitter(Duration::from_millis(200), Jitter { max: Duration::from_millis(300), seed });
            let mut now = Duration::ZERO;
            let mut got = Vec::new();
            for (i, g) in gaps.iter().enumerate() {
                now += Duration::from_millis(*g);
                let t = ch.send(i, now).unwrap();
                prop_assert!(t >= now + Duration::from_millis(200));
                prop_assert!(t <= now + Duration::from_millis(500) || t == ch.last_deliver);
                got.extend(ch.poll(now).unwrap());
            }
            got.extend(ch.poll(now + Duration::from_secs(10)).unwrap());
            prop_assert_eq!(got, (0..gaps.len()).collect::<Vec<_>>());
        }
    }
}
