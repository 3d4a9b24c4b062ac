//! Deterministic slot-driven simulation of an SoC bus.
//!
//! One slot covers `slot_cycles` clock cycles; all statistics in this crate
//! are computed at slot granularity, so nothing finer is modeled. Each slot,
//! every master draws an injection count from its seeded model and
//! distributes the packets uniformly over its channels; a channel with
//! traffic makes one establishment attempt which is acknowledged unless a
//! blocking payload suppresses it. Active Trojans transform per-channel
//! traffic and log their deltas as ground truth.
//!
//! A scenario is a pure function of `(config, trojans, seed)`: the same
//! inputs always produce a bit-identical [`TraceSet`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ObservationSeries;
use crate::traffic::{draw_injection, InjectionModel, Topology};
use crate::trojan::{ActivationLog, TrojanSpec, TrojanState};

/// Stable identifier of a master-to-slave channel, formatted
/// `master->slave`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(String);

impl ChannelId {
    pub fn new(master: &str, slave: &str) -> Self {
        Self(format!("{master}->{slave}"))
    }

    pub fn from_raw(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Master,
    Slave,
}

/// One module in the SoC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDesc {
    pub id: String,
    pub role: Role,
    #[serde(default)]
    pub trusted: bool,
    /// Injection model; required for masters, absent for slaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<InjectionModel>,
}

/// A directed master-to-slave channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub master: String,
    pub slave: String,
}

impl ChannelSpec {
    pub fn id(&self) -> ChannelId {
        ChannelId::new(&self.master, &self.slave)
    }
}

/// Static description of the simulated SoC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConfig {
    pub modules: Vec<ModuleDesc>,
    pub channels: Vec<ChannelSpec>,
    pub topology: Topology,
    pub total_slots: usize,
    pub slot_cycles: u32,
}

impl SocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_slots == 0 {
            return Err(Error::config("total_slots must be positive"));
        }
        if self.slot_cycles == 0 {
            return Err(Error::config("slot_cycles must be positive"));
        }
        self.topology.validate().map_err(|e| Error::config(e.to_string()))?;

        let mut ids = std::collections::BTreeSet::new();
        for module in &self.modules {
            if !ids.insert(module.id.as_str()) {
                return Err(Error::config(format!("duplicate module id {}", module.id)));
            }
            match module.role {
                Role::Master => {
                    let model = module.injection.as_ref().ok_or_else(|| {
                        Error::config(format!("master {} has no injection model", module.id))
                    })?;
                    model.validate().map_err(|e| {
                        Error::config(format!("master {}: {e}", module.id))
                    })?;
                }
                Role::Slave => {
                    if module.injection.is_some() {
                        return Err(Error::config(format!(
                            "slave {} must not declare an injection model",
                            module.id
                        )));
                    }
                }
            }
        }

        let trusted = self.modules.iter().filter(|m| m.trusted).count();
        if trusted != 1 {
            return Err(Error::config(format!(
                "exactly one module must be flagged trusted, found {trusted}"
            )));
        }

        if self.channels.is_empty() {
            return Err(Error::config("at least one channel is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for channel in &self.channels {
            let master = self.modules.iter().find(|m| m.id == channel.master);
            match master {
                Some(m) if m.role == Role::Master => {}
                Some(_) => {
                    return Err(Error::config(format!(
                        "channel endpoint {} is not a master",
                        channel.master
                    )))
                }
                None => {
                    return Err(Error::config(format!(
                        "channel references unknown module {}",
                        channel.master
                    )))
                }
            }
            let slave = self.modules.iter().find(|m| m.id == channel.slave);
            match slave {
                Some(m) if m.role == Role::Slave => {}
                Some(_) => {
                    return Err(Error::config(format!(
                        "channel endpoint {} is not a slave",
                        channel.slave
                    )))
                }
                None => {
                    return Err(Error::config(format!(
                        "channel references unknown module {}",
                        channel.slave
                    )))
                }
            }
            if !seen.insert(channel.id()) {
                return Err(Error::config(format!("duplicate channel {}", channel.id())));
            }
        }
        for module in &self.modules {
            if module.role == Role::Master
                && !self.channels.iter().any(|c| c.master == module.id)
            {
                return Err(Error::config(format!(
                    "master {} appears in no channel",
                    module.id
                )));
            }
        }
        Ok(())
    }

    /// Channel ids in sorted order.
    pub fn channel_ids(&self) -> Vec<ChannelId> {
        let mut ids: Vec<ChannelId> = self.channels.iter().map(ChannelSpec::id).collect();
        ids.sort();
        ids
    }

    pub fn trusted_module(&self) -> Option<&ModuleDesc> {
        self.modules.iter().find(|m| m.trusted)
    }

    /// Channels whose master or slave is the trusted module.
    pub fn trusted_channels(&self) -> Vec<ChannelId> {
        match self.trusted_module() {
            Some(t) => self
                .channels
                .iter()
                .filter(|c| c.master == t.id || c.slave == t.id)
                .map(ChannelSpec::id)
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Recorded per-slot behavior of one channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelTrace {
    channel: ChannelId,
    series: ObservationSeries,
    acks: Vec<u32>,
    active: Vec<bool>,
}

impl ChannelTrace {
    /// Build a trace from per-slot packet and ack counts. The active flag
    /// is derived: a slot is active when it carried traffic.
    pub fn new(channel: ChannelId, series: ObservationSeries, acks: Vec<u32>) -> Result<Self> {
        if acks.len() != series.len() {
            return Err(Error::invalid_input(format!(
                "ack vector length {} does not match series length {}",
                acks.len(),
                series.len()
            )));
        }
        for (slot, (&packets, &ack)) in series.samples().iter().zip(&acks).enumerate() {
            if ack as u64 > packets {
                return Err(Error::invalid_input(format!(
                    "slot {slot}: ack count {ack} exceeds packet count {packets}"
                )));
            }
        }
        let active = series.samples().iter().map(|&p| p > 0).collect();
        Ok(Self { channel, series, acks, active })
    }

    pub fn channel(&self) -> &ChannelId {
        &self.channel
    }

    pub fn series(&self) -> &ObservationSeries {
        &self.series
    }

    pub fn packets(&self) -> &[u64] {
        self.series.samples()
    }

    pub fn acks(&self) -> &[u32] {
        &self.acks
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// All channel traces from one scenario execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSet {
    pub seed: u64,
    pub config_digest: String,
    pub total_slots: usize,
    pub channels: BTreeMap<ChannelId, ChannelTrace>,
}

/// A scenario execution: the traces plus the per-Trojan ground truth and
/// the raw per-master injection series (pre-Trojan), kept for conservation
/// checks and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub traces: TraceSet,
    pub activations: BTreeMap<String, ActivationLog>,
    pub injected: BTreeMap<String, Vec<u64>>,
}

/// FNV-1a over the serialized SoC description. Identifies which
/// configuration produced a trace set; Trojans are deliberately excluded so
/// a run with dormant Trojans is bit-identical to the clean run.
fn config_digest(config: &SocConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub(crate) fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3u64;
    for &part in parts {
        state ^= part;
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}

const STREAM_INJECTION: u64 = 1;
const STREAM_ROUTING: u64 = 2;
const STREAM_TROJAN: u64 = 3;

/// Execute one scenario.
///
/// Advances slot by slot: masters inject, packets are distributed uniformly
/// over each master's channels, Trojans transform traffic on their target
/// channels, slaves acknowledge establishment attempts that were not
/// blocked. Fully determined by `(config, trojans, seed)`.
pub fn run_scenario(
    config: &SocConfig,
    trojans: &[TrojanSpec],
    seed: u64,
) -> Result<ScenarioRun> {
    config.validate()?;
    for trojan in trojans {
        trojan.validate()?;
    }

    let channel_ids = config.channel_ids();
    let slots = config.total_slots;

    // Per-master injection series and the channels each master feeds.
    let masters: Vec<&ModuleDesc> = config
        .modules
        .iter()
        .filter(|m| m.role == Role::Master)
        .collect();
    let mut injected_series: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut routing: Vec<(Vec<ChannelId>, ChaCha8Rng)> = Vec::with_capacity(masters.len());
    for (index, master) in masters.iter().enumerate() {
        let model = master.injection.as_ref().expect("validated");
        let scoped = InjectionModel {
            seed: derive_seed(&[seed, STREAM_INJECTION, index as u64, model.seed]),
            ..*model
        };
        let series = draw_injection(&scoped, slots, config.slot_cycles)?;
        injected_series.insert(master.id.clone(), series.samples().to_vec());
        let mut outgoing: Vec<ChannelId> = config
            .channels
            .iter()
            .filter(|c| c.master == master.id)
            .map(ChannelSpec::id)
            .collect();
        outgoing.sort();
        let route_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[seed, STREAM_ROUTING, index as u64]));
        routing.push((outgoing, route_rng));
    }

    // Per-Trojan resolved targets, rng stream, state, and ground truth.
    let mut trojan_rngs = Vec::with_capacity(trojans.len());
    let mut trojan_states = vec![TrojanState::default(); trojans.len()];
    let mut trojan_targets: Vec<Vec<ChannelId>> = Vec::with_capacity(trojans.len());
    let mut activations: BTreeMap<String, ActivationLog> = BTreeMap::new();
    for (index, trojan) in trojans.iter().enumerate() {
        let as_channel = ChannelId::from_raw(trojan.target.clone());
        let targets: Vec<ChannelId> = if channel_ids.contains(&as_channel) {
            vec![as_channel]
        } else if config.modules.iter().any(|m| m.id == trojan.target) {
            let mut targets: Vec<ChannelId> = config
                .channels
                .iter()
                .filter(|c| c.master == trojan.target || c.slave == trojan.target)
                .map(ChannelSpec::id)
                .collect();
            targets.sort();
            targets
        } else {
            return Err(Error::config(format!(
                "trojan {} targets unknown module or channel {}",
                trojan.id, trojan.target
            )));
        };
        if targets.is_empty() {
            return Err(Error::config(format!(
                "trojan {} target {} touches no channel",
                trojan.id, trojan.target
            )));
        }
        if activations.contains_key(&trojan.id) {
            return Err(Error::config(format!("duplicate trojan id {}", trojan.id)));
        }
        activations.insert(trojan.id.clone(), ActivationLog::new(targets.clone(), slots));
        trojan_targets.push(targets);
        trojan_rngs.push(ChaCha8Rng::seed_from_u64(derive_seed(&[
            seed,
            STREAM_TROJAN,
            index as u64,
        ])));
    }

    let mut packets: BTreeMap<ChannelId, Vec<u64>> = channel_ids
        .iter()
        .map(|id| (id.clone(), vec![0u64; slots]))
        .collect();
    let mut acks: BTreeMap<ChannelId, Vec<u32>> = channel_ids
        .iter()
        .map(|id| (id.clone(), vec![0u32; slots]))
        .collect();

    for slot in 0..slots {
        // Injection and uniform distribution over each master's channels.
        let mut slot_packets: BTreeMap<&ChannelId, u64> =
            channel_ids.iter().map(|id| (id, 0u64)).collect();
        for (master, (outgoing, route_rng)) in masters.iter().zip(routing.iter_mut()) {
            let count = injected_series[&master.id][slot];
            if outgoing.len() == 1 {
                *slot_packets.get_mut(&outgoing[0]).expect("known channel") += count;
            } else {
                for _ in 0..count {
                    let pick = route_rng.random_range(0..outgoing.len());
                    *slot_packets.get_mut(&outgoing[pick]).expect("known channel") += 1;
                }
            }
        }

        let mut ack_allowed: BTreeMap<&ChannelId, bool> =
            channel_ids.iter().map(|id| (id, true)).collect();

        for (index, trojan) in trojans.iter().enumerate() {
            let targets = &trojan_targets[index];
            // Establishment attempts observed on the targets feed the
            // sequence-count trigger, including the current slot.
            for target in targets {
                if slot_packets[target] > 0 {
                    trojan_states[index].note_attempt();
                }
            }
            let rng = &mut trojan_rngs[index];
            let active = trojan.trigger_active(slot, &trojan_states[index], rng);
            let log = activations.get_mut(&trojan.id).expect("registered");
            log.active[slot] = active;
            if !active {
                continue;
            }
            for target in targets {
                let injected = slot_packets[target];
                let effect = trojan.apply_payload(true, injected, rng);
                *slot_packets.get_mut(target).expect("known channel") = effect.observed;
                if !effect.ack_allowed {
                    *ack_allowed.get_mut(target).expect("known channel") = false;
                }
                log.deltas[slot] += effect.delta;
            }
        }

        for id in &channel_ids {
            let observed = slot_packets[id];
            packets.get_mut(id).expect("known channel")[slot] = observed;
            // One establishment attempt per slot per channel with traffic;
            // acknowledged unless a blocking payload suppressed it.
            if observed > 0 && ack_allowed[id] {
                acks.get_mut(id).expect("known channel")[slot] = 1;
            }
        }
    }

    let mut channels = BTreeMap::new();
    for id in &channel_ids {
        let series = ObservationSeries::new(
            packets.remove(id).expect("known channel"),
            config.slot_cycles,
        )?;
        let trace = ChannelTrace::new(id.clone(), series, acks.remove(id).expect("known"))?;
        channels.insert(id.clone(), trace);
    }

    Ok(ScenarioRun {
        traces: TraceSet {
            seed,
            config_digest: config_digest(config),
            total_slots: slots,
            channels,
        },
        activations,
        injected: injected_series,
    })
}

/// Fraction of establishment attempts in `window` that were acknowledged;
/// 0 when the window carried no attempts (a blocked channel).
pub fn measured_acceptance(trace: &ChannelTrace, window: Range<usize>) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::invalid_input("empty evaluation window"));
    }
    if window.end > trace.len() {
        return Err(Error::invalid_input(format!(
            "window {}..{} exceeds trace length {}",
            window.start,
            window.end,
            trace.len()
        )));
    }
    let mut attempts = 0u64;
    let mut acked = 0u64;
    for slot in window {
        if trace.active[slot] {
            attempts += 1;
            if trace.acks[slot] > 0 {
                acked += 1;
            }
        }
    }
    if attempts == 0 {
        Ok(0.0)
    } else {
        Ok(acked as f64 / attempts as f64)
    }
}

/// Contiguous slice of a trace as an observation series; slot length is
/// propagated.
pub fn window_series(trace: &ChannelTrace, start: usize, n: usize) -> Result<ObservationSeries> {
    if n == 0 {
        return Err(Error::invalid_input("window length must be at least 1"));
    }
    let end = start.checked_add(n).ok_or_else(|| Error::invalid_input("window overflow"))?;
    if end > trace.len() {
        return Err(Error::invalid_input(format!(
            "window {start}..{end} exceeds trace length {}",
            trace.len()
        )));
    }
    ObservationSeries::new(
        trace.packets()[start..end].to_vec(),
        trace.series.slot_cycles(),
    )
}
