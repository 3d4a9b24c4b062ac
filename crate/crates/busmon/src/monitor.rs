//! Golden-profile extraction, the assertion engine, and monitor placement.
//!
//! During design time a Trojan-free run of the SoC is windowed and the mean
//! `(H, sigma, P)` vector per channel becomes the golden reference. At run
//! time each evaluation window is measured the same way and checked against
//! four always-assertions: P-equality, P-bounds, sigma-equality and
//! H-equality. Equality is tolerance-banded (default 10%, covering process
//! and environmental variation); the bounds come from the acceptance
//! probability formulas. A monitor either watches every channel, one
//! channel per region, or one globally selected channel per window.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, derive_seed, ChannelId, ChannelTrace, TraceSet};
use crate::stats::{hurst_three_block, population_stddev};
use crate::traffic::{acceptance_probability, AcceptanceMode, AcceptanceModel};

/// Absolute band used in place of a relative tolerance when the golden
/// component is zero, so a measured zero still passes without dividing by
/// zero.
pub const ZERO_GOLDEN_BAND: f64 = 0.01;

/// One `(H, sigma, P)` measurement over an evaluation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub h: f64,
    pub sigma: f64,
    pub p: f64,
}

impl StatVector {
    pub fn new(h: f64, sigma: f64, p: f64) -> Self {
        Self {
            h: h.clamp(0.0, 1.0),
            sigma: sigma.max(0.0),
            p: p.clamp(0.0, 1.0),
        }
    }
}

/// Parameters of golden-profile extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Evaluation window length in slots (default 512 observations).
    pub window_slots: usize,
    /// Relative variation cap on H, sigma and P (default 0.10).
    pub tolerance: f64,
    pub acceptance: AcceptanceModel,
}

impl ProfileParams {
    pub fn new(acceptance: AcceptanceModel) -> Self {
        Self { window_slots: 512, tolerance: 0.10, acceptance }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_slots < 8 || self.window_slots % 4 != 0 {
            return Err(Error::invalid_input(
                "window_slots must be divisible by 4 and at least 8",
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::invalid_input("tolerance must be in (0, 1)"));
        }
        self.acceptance.validate()
    }
}

/// Per-channel golden reference extracted from a Trojan-free run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenProfile {
    pub tolerance: f64,
    pub window_slots: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub references: BTreeMap<ChannelId, StatVector>,
}

impl GoldenProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::invalid_input("tolerance must be in (0, 1)"));
        }
        if self.window_slots < 8 || self.window_slots % 4 != 0 {
            return Err(Error::invalid_input(
                "window_slots must be divisible by 4 and at least 8",
            ));
        }
        if !(self.p_min <= self.p_max) {
            return Err(Error::invalid_input("p_min must not exceed p_max"));
        }
        if self.references.is_empty() {
            return Err(Error::invalid_input("profile has no channels"));
        }
        Ok(())
    }
}

/// Measure one evaluation window of a trace: H from the three-block
/// estimator, sigma as the population standard deviation, P as the acked
/// fraction of establishment attempts.
pub fn measure_window(trace: &ChannelTrace, window: Range<usize>) -> Result<StatVector> {
    let series = sim::window_series(trace, window.start, window.end.saturating_sub(window.start))?;
    let h = hurst_three_block(&series)?;
    let sigma = population_stddev(&series);
    let p = sim::measured_acceptance(trace, window)?;
    Ok(StatVector::new(h.value, sigma, p))
}

/// Extract the golden profile from a Trojan-free trace set.
///
/// Every channel is windowed into consecutive `window_slots`-sized windows
/// and the mean window vector becomes that channel's reference. A channel
/// that carried no traffic at all cannot define a profile and is rejected.
pub fn extract_golden(clean: &TraceSet, params: &ProfileParams) -> Result<GoldenProfile> {
    params.validate()?;
    let window = params.window_slots;
    if clean.total_slots < 2 * window {
        return Err(Error::invalid_input(format!(
            "golden extraction needs at least {} slots (2 windows), got {}",
            2 * window,
            clean.total_slots
        )));
    }
    let windows = clean.total_slots / window;
    let mut references = BTreeMap::new();
    for (id, trace) in &clean.channels {
        if trace.packets().iter().all(|&p| p == 0) {
            return Err(Error::invalid_input(format!(
                "dead channel {id}: zero traffic in the clean run cannot define a profile"
            )));
        }
        let mut sum = (0.0f64, 0.0f64, 0.0f64);
        for w in 0..windows {
            let vector = measure_window(trace, w * window..(w + 1) * window)?;
            sum = (sum.0 + vector.h, sum.1 + vector.sigma, sum.2 + vector.p);
        }
        let n = windows as f64;
        references.insert(id.clone(), StatVector::new(sum.0 / n, sum.1 / n, sum.2 / n));
    }
    let mapped = acceptance_probability(&params.acceptance, AcceptanceMode::Mapped)?;
    let receivers = acceptance_probability(&params.acceptance, AcceptanceMode::Receivers)?;
    let (p_min, p_max) = if mapped <= receivers {
        (mapped, receivers)
    } else {
        (receivers, mapped)
    };
    Ok(GoldenProfile {
        tolerance: params.tolerance,
        window_slots: window,
        p_min,
        p_max,
        references,
    })
}

/// The four always-assertions over one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertionKind {
    PEquality,
    PBounds,
    SigmaEquality,
    HEquality,
}

/// The statistical parameters a detector can enable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Hurst,
    Acceptance,
    StdDev,
}

impl AssertionKind {
    pub fn parameter(&self) -> Parameter {
        match self {
            AssertionKind::PEquality | AssertionKind::PBounds => Parameter::Acceptance,
            AssertionKind::SigmaEquality => Parameter::StdDev,
            AssertionKind::HEquality => Parameter::Hurst,
        }
    }
}

/// Pass/fail per assertion for one window. The overall verdict is the
/// conjunction of the individual assertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionVerdict {
    pub p_equality: bool,
    pub p_bounds: bool,
    pub sigma_equality: bool,
    pub h_equality: bool,
}

impl AssertionVerdict {
    pub fn overall(&self) -> bool {
        self.p_equality && self.p_bounds && self.sigma_equality && self.h_equality
    }

    pub fn failed(&self) -> Vec<AssertionKind> {
        let mut failed = Vec::new();
        if !self.p_equality {
            failed.push(AssertionKind::PEquality);
        }
        if !self.p_bounds {
            failed.push(AssertionKind::PBounds);
        }
        if !self.sigma_equality {
            failed.push(AssertionKind::SigmaEquality);
        }
        if !self.h_equality {
            failed.push(AssertionKind::HEquality);
        }
        failed
    }

    /// Parameters with at least one failed assertion.
    pub fn violating_parameters(&self) -> Vec<Parameter> {
        let mut params: Vec<Parameter> =
            self.failed().iter().map(AssertionKind::parameter).collect();
        params.sort();
        params.dedup();
        params
    }

    pub fn parameter_fails(&self, parameter: Parameter) -> bool {
        match parameter {
            Parameter::Hurst => !self.h_equality,
            Parameter::Acceptance => !self.p_equality || !self.p_bounds,
            Parameter::StdDev => !self.sigma_equality,
        }
    }
}

fn within_band(measured: f64, golden: f64, tolerance: f64) -> bool {
    if golden == 0.0 {
        measured.abs() <= ZERO_GOLDEN_BAND
    } else {
        (measured - golden).abs() <= tolerance * golden.abs()
    }
}

/// Check one window's measurement against the golden reference of
/// `channel`.
pub fn check_assertions(
    golden: &GoldenProfile,
    measured: &StatVector,
    channel: &ChannelId,
) -> Result<AssertionVerdict> {
    let reference = golden.references.get(channel).ok_or_else(|| {
        Error::invalid_input(format!("channel {channel} is not in the golden profile"))
    })?;
    Ok(AssertionVerdict {
        p_equality: within_band(measured.p, reference.p, golden.tolerance),
        p_bounds: golden.p_min <= measured.p && measured.p <= golden.p_max,
        sigma_equality: within_band(measured.sigma, reference.sigma, golden.tolerance),
        h_equality: within_band(measured.h, reference.h, golden.tolerance),
    })
}

/// How monitored channels are chosen per window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    RoundRobin,
    SeededRandom,
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::RoundRobin
    }
}

/// Distribution of monitoring resources over the channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorPlacement {
    /// One monitor for the whole SoC; it checks one channel per window.
    Global {
        #[serde(default)]
        rule: SelectionRule,
    },
    /// One monitor per region; regions partition the channel set.
    RegionBased {
        regions: Vec<Vec<ChannelId>>,
        #[serde(default)]
        rule: SelectionRule,
    },
    /// One monitor per channel: every channel checked every window.
    ChannelBased,
}

fn pick(channels: &[ChannelId], window: usize, rule: SelectionRule, seed: u64) -> ChannelId {
    match rule {
        SelectionRule::RoundRobin => channels[window % channels.len()].clone(),
        SelectionRule::SeededRandom => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5e1e_c7ed, window as u64]));
            channels[rng.random_range(0..channels.len())].clone()
        }
    }
}

/// Channels checked during window index `window` under `placement`.
pub fn select_windows(
    placement: &MonitorPlacement,
    channels: &[ChannelId],
    window: usize,
    seed: u64,
) -> Result<Vec<ChannelId>> {
    if channels.is_empty() {
        return Err(Error::invalid_input("channel set must not be empty"));
    }
    match placement {
        MonitorPlacement::ChannelBased => Ok(channels.to_vec()),
        MonitorPlacement::Global { rule } => Ok(vec![pick(channels, window, *rule, seed)]),
        MonitorPlacement::RegionBased { regions, rule } => {
            let mut covered: Vec<&ChannelId> = regions.iter().flatten().collect();
            covered.sort();
            let mut expected: Vec<&ChannelId> = channels.iter().collect();
            expected.sort();
            covered.dedup();
            if covered != expected {
                return Err(Error::invalid_input(
                    "regions must partition the channel set",
                ));
            }
            Ok(regions
                .iter()
                .enumerate()
                .map(|(index, region)| {
                    pick(region, window, *rule, derive_seed(&[seed, index as u64]))
                })
                .collect())
        }
    }
}
