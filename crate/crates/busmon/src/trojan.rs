//! Trojan trigger conditions and payload behaviors.
//!
//! Payloads are abstract packet-level effects: blocking/jamming a channel,
//! leaking extra traffic, replacing the injection process, and disrupting
//! control so traffic is intermittently dropped. Triggers model the
//! observable activation patterns: always on, dormant until a slot
//! threshold, a per-slot probabilistic trigger, and a latching trigger
//! driven by establishment attempts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ChannelId;

/// When a Trojan's payload is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    /// Active from slot 0.
    AlwaysOn,
    /// Active from `slot` onward.
    AtSlot { slot: usize },
    /// Active in any given slot with probability `q`, independently per
    /// slot (seeded; deterministic per scenario).
    Probabilistic { q: f64 },
    /// Latches on permanently once `attempts` establishment attempts have
    /// been observed on the target.
    SequenceCount { attempts: u64 },
}

/// What an active Trojan does to the per-slot traffic of its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadKind {
    /// Suppress all packets and acknowledgments.
    Block,
    /// Inject `intensity` extra packets per slot.
    Leak { intensity: f64 },
    /// Re-time the injection: multiply the per-slot count by `intensity`
    /// and re-round.
    Replace { intensity: f64 },
    /// Drop the whole slot's traffic with probability `intensity`.
    Disrupt { intensity: f64 },
}

/// A Trojan attached to one module or channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrojanSpec {
    pub id: String,
    /// Channel id (`master->slave`) or module id.
    pub target: String,
    pub trigger: Trigger,
    pub payload: PayloadKind,
}

impl TrojanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::config("trojan id must not be empty"));
        }
        match self.trigger {
            Trigger::Probabilistic { q } => {
                if !(0.0..=1.0).contains(&q) || q.is_nan() {
                    return Err(Error::config(format!(
                        "trojan {}: trigger probability must be in [0, 1], got {q}",
                        self.id
                    )));
                }
            }
            Trigger::SequenceCount { attempts } => {
                if attempts == 0 {
                    return Err(Error::config(format!(
                        "trojan {}: sequence count must be at least 1",
                        self.id
                    )));
                }
            }
            Trigger::AlwaysOn | Trigger::AtSlot { .. } => {}
        }
        match self.payload {
            PayloadKind::Leak { intensity } | PayloadKind::Replace { intensity } => {
                if !intensity.is_finite() || intensity < 0.0 {
                    return Err(Error::config(format!(
                        "trojan {}: payload intensity must be finite and non-negative",
                        self.id
                    )));
                }
            }
            PayloadKind::Disrupt { intensity } => {
                if !(0.0..=1.0).contains(&intensity) || intensity.is_nan() {
                    return Err(Error::config(format!(
                        "trojan {}: disrupt probability must be in [0, 1]",
                        self.id
                    )));
                }
            }
            PayloadKind::Block => {}
        }
        Ok(())
    }

    /// Evaluate the trigger for one slot. `state` carries the establishment
    /// attempts already observed on the target (including the current
    /// slot); the rng is the Trojan's own seeded stream.
    pub fn trigger_active(&self, slot: usize, state: &TrojanState, rng: &mut ChaCha8Rng) -> bool {
        match self.trigger {
            Trigger::AlwaysOn => true,
            Trigger::AtSlot { slot: threshold } => slot >= threshold,
            Trigger::Probabilistic { q } => rng.random_bool(q),
            Trigger::SequenceCount { attempts } => state.attempts_seen >= attempts,
        }
    }

    /// Transform one slot's injected count. A dormant Trojan is an exact
    /// identity.
    pub fn apply_payload(&self, active: bool, injected: u64, rng: &mut ChaCha8Rng) -> PayloadEffect {
        if !active {
            return PayloadEffect { observed: injected, ack_allowed: true, delta: 0 };
        }
        match self.payload {
            PayloadKind::Block => PayloadEffect {
                observed: 0,
                ack_allowed: false,
                delta: -(injected as i64),
            },
            PayloadKind::Leak { intensity } => {
                let extra = intensity.round() as u64;
                PayloadEffect {
                    observed: injected + extra,
                    ack_allowed: true,
                    delta: extra as i64,
                }
            }
            PayloadKind::Replace { intensity } => {
                let observed = (intensity * injected as f64).round() as u64;
                PayloadEffect {
                    observed,
                    ack_allowed: true,
                    delta: observed as i64 - injected as i64,
                }
            }
            PayloadKind::Disrupt { intensity } => {
                if rng.random_bool(intensity) {
                    PayloadEffect {
                        observed: 0,
                        ack_allowed: true,
                        delta: -(injected as i64),
                    }
                } else {
                    PayloadEffect { observed: injected, ack_allowed: true, delta: 0 }
                }
            }
        }
    }
}

/// Result of applying a payload to one slot of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadEffect {
    pub observed: u64,
    pub ack_allowed: bool,
    /// Signed packet delta versus the injected count.
    pub delta: i64,
}

/// Per-Trojan runtime state maintained by the simulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrojanState {
    pub attempts_seen: u64,
}

impl TrojanState {
    pub fn note_attempt(&mut self) {
        self.attempts_seen += 1;
    }
}

/// Ground-truth record of one Trojan over a scenario: which channels it
/// targeted, whether its trigger was active per slot, and the net traffic
/// delta it applied per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActivationLog {
    pub targets: Vec<ChannelId>,
    pub active: Vec<bool>,
    pub deltas: Vec<i64>,
}

impl ActivationLog {
    pub fn new(targets: Vec<ChannelId>, slots: usize) -> Self {
        Self {
            targets,
            active: vec![false; slots],
            deltas: vec![0; slots],
        }
    }

    /// Deltas must be zero wherever the trigger was inactive.
    pub fn check_consistency(&self) -> Result<()> {
        for (slot, (&active, &delta)) in self.active.iter().zip(&self.deltas).enumerate() {
            if !active && delta != 0 {
                return Err(Error::invalid_input(format!(
                    "activation log has a nonzero delta at inactive slot {slot}"
                )));
            }
        }
        Ok(())
    }

    /// True if the trigger was active during at least one slot of
    /// `window` (ground truth for window-level evaluation).
    pub fn active_in(&self, window: std::ops::Range<usize>) -> bool {
        self.active[window.start.min(self.active.len())..window.end.min(self.active.len())]
            .iter()
            .any(|&a| a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn spec(trigger: Trigger, payload: PayloadKind) -> TrojanSpec {
        TrojanSpec {
            id: "t".into(),
            target: "m0->s0".into(),
            trigger,
            payload,
        }
    }

    #[test]
    fn block_suppresses_everything() {
        let t = spec(Trigger::AlwaysOn, PayloadKind::Block);
        let e = t.apply_payload(true, 7, &mut rng());
        assert_eq!(e, PayloadEffect { observed: 0, ack_allowed: false, delta: -7 });
    }

    #[test]
    fn leak_is_additive() {
        let t = spec(Trigger::AlwaysOn, PayloadKind::Leak { intensity: 5.0 });
        let e = t.apply_payload(true, 10, &mut rng());
        assert_eq!(e, PayloadEffect { observed: 15, ack_allowed: true, delta: 5 });
    }

    #[test]
    fn replace_scales_and_rerounds() {
        let t = spec(Trigger::AlwaysOn, PayloadKind::Replace { intensity: 0.5 });
        let e = t.apply_payload(true, 7, &mut rng());
        assert_eq!(e.observed, 4); // round(3.5)
        assert_eq!(e.delta, -3);
        assert!(e.ack_allowed);
    }

    #[test]
    fn disrupt_extremes() {
        let always = spec(Trigger::AlwaysOn, PayloadKind::Disrupt { intensity: 1.0 });
        let e = always.apply_payload(true, 9, &mut rng());
        assert_eq!(e, PayloadEffect { observed: 0, ack_allowed: true, delta: -9 });
        let never = spec(Trigger::AlwaysOn, PayloadKind::Disrupt { intensity: 0.0 });
        let e = never.apply_payload(true, 9, &mut rng());
        assert_eq!(e, PayloadEffect { observed: 9, ack_allowed: true, delta: 0 });
    }

    #[test]
    fn dormant_is_identity() {
        let t = spec(Trigger::AlwaysOn, PayloadKind::Block);
        let e = t.apply_payload(false, 10, &mut rng());
        assert_eq!(e, PayloadEffect { observed: 10, ack_allowed: true, delta: 0 });
    }

    #[test]
    fn at_slot_threshold_semantics() {
        let t = spec(Trigger::AtSlot { slot: 100 }, PayloadKind::Block);
        let state = TrojanState::default();
        assert!(!t.trigger_active(99, &state, &mut rng()));
        assert!(t.trigger_active(100, &state, &mut rng()));
        assert!(t.trigger_active(101, &state, &mut rng()));
    }

    #[test]
    fn always_on_fires_at_slot_zero() {
        let t = spec(Trigger::AlwaysOn, PayloadKind::Block);
        assert!(t.trigger_active(0, &TrojanState::default(), &mut rng()));
    }

    #[test]
    fn zero_probability_never_fires() {
        let t = spec(Trigger::Probabilistic { q: 0.0 }, PayloadKind::Block);
        let state = TrojanState::default();
        let mut r = rng();
        assert!((0..1000).all(|slot| !t.trigger_active(slot, &state, &mut r)));
        let certain = spec(Trigger::Probabilistic { q: 1.0 }, PayloadKind::Block);
        let mut r = rng();
        assert!((0..100).all(|slot| certain.trigger_active(slot, &state, &mut r)));
    }

    #[test]
    fn sequence_count_latches_on_mth_attempt() {
        let t = spec(Trigger::SequenceCount { attempts: 3 }, PayloadKind::Block);
        let mut state = TrojanState::default();
        let mut r = rng();
        state.note_attempt();
        assert!(!t.trigger_active(0, &state, &mut r));
        state.note_attempt();
        assert!(!t.trigger_active(1, &state, &mut r));
        state.note_attempt();
        assert!(t.trigger_active(2, &state, &mut r));
        assert!(t.trigger_active(3, &state, &mut r));
    }

    #[test]
    fn validation_catches_bad_parameters() {
        assert!(spec(Trigger::Probabilistic { q: 1.5 }, PayloadKind::Block).validate().is_err());
        assert!(spec(Trigger::AlwaysOn, PayloadKind::Leak { intensity: -1.0 }).validate().is_err());
        assert!(spec(Trigger::AlwaysOn, PayloadKind::Disrupt { intensity: 2.0 }).validate().is_err());
        assert!(spec(Trigger::SequenceCount { attempts: 0 }, PayloadKind::Block).validate().is_err());
        assert!(spec(Trigger::AlwaysOn, PayloadKind::Block).validate().is_ok());
    }

    #[test]
    fn activation_log_consistency() {
        let mut log = ActivationLog::new(vec![ChannelId::from_raw("a->b")], 4);
        log.active[2] = true;
        log.deltas[2] = -5;
        assert!(log.check_consistency().is_ok());
        log.deltas[1] = 3;
        assert!(log.check_consistency().is_err());
        assert!(log.active_in(0..4));
        assert!(!log.active_in(0..2));
    }
}
