//! Topology hop counts, acceptance probability, spatial hop distribution,
//! and seeded packet-injection generators.
//!
//! The hop-count formulas are the infinite-lattice counts for ring, 2D-mesh
//! and 3D-mesh interconnects; finite-extent clipping is out of scope. The
//! spatial hop distribution gives the probability that a packet travels
//! farther than `d` hops when every module within reach accepts it
//! independently with probability `p`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ObservationSeries;

/// Interconnect topology with per-kind extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Ring { length: u32 },
    Mesh2d { width: u32, height: u32 },
    Mesh3d { width: u32, height: u32, depth: u32 },
}

impl Topology {
    pub fn ring(length: u32) -> Result<Self> {
        let topo = Topology::Ring { length };
        topo.validate()?;
        Ok(topo)
    }

    pub fn mesh2d(width: u32, height: u32) -> Result<Self> {
        let topo = Topology::Mesh2d { width, height };
        topo.validate()?;
        Ok(topo)
    }

    pub fn mesh3d(width: u32, height: u32, depth: u32) -> Result<Self> {
        let topo = Topology::Mesh3d { width, height, depth };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        let extents: Vec<u32> = match *self {
            Topology::Ring { length } => vec![length],
            Topology::Mesh2d { width, height } => vec![width, height],
            Topology::Mesh3d { width, height, depth } => vec![width, height, depth],
        };
        if extents.iter().any(|&e| e < 2) {
            return Err(Error::invalid_input("topology extents must be at least 2"));
        }
        Ok(())
    }
}

/// Module-count parameters behind the acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceModel {
    /// Total modules in the SoC.
    pub total_modules: u32,
    /// Modules the application is mapped onto.
    pub mapped_modules: u32,
    /// Receivers a particular instruction set actually communicates with.
    pub receivers: u32,
}

impl AcceptanceModel {
    pub fn validate(&self) -> Result<()> {
        if self.mapped_modules < 2 || self.receivers < 2 {
            return Err(Error::invalid_input(
                "mapped_modules and receivers must be at least 2",
            ));
        }
        if self.mapped_modules > self.total_modules {
            return Err(Error::invalid_input(
                "mapped_modules cannot exceed total_modules",
            ));
        }
        Ok(())
    }
}

/// Which count the acceptance probability is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceMode {
    Mapped,
    Receivers,
}

/// Acceptance probability `1/(n-1)` over mapped modules or `1/(r-1)` over
/// receivers.
pub fn acceptance_probability(model: &AcceptanceModel, mode: AcceptanceMode) -> Result<f64> {
    let count = match mode {
        AcceptanceMode::Mapped => model.mapped_modules,
        AcceptanceMode::Receivers => model.receivers,
    };
    if count < 2 {
        return Err(Error::invalid_input(format!(
            "acceptance probability needs a count of at least 2, got {count}"
        )));
    }
    Ok(1.0 / (count - 1) as f64)
}

/// Number of modules at exactly hop distance `d` from a source.
///
/// Ring counts honor the finite length: 2 while `2d` is short of the ring
/// length, 1 at the antipode of an even ring, 0 beyond. Mesh counts are the
/// infinite-lattice formulas.
pub fn neighbors_at_distance(topo: &Topology, d: u32) -> Result<u64> {
    if d < 1 {
        return Err(Error::invalid_input("hop distance must be at least 1"));
    }
    let d = d as u64;
    Ok(match *topo {
        Topology::Ring { length } => {
            let length = length as u64;
            if 2 * d < length {
                2
            } else if 2 * d == length {
                1
            } else {
                0
            }
        }
        Topology::Mesh2d { .. } => 4 * d,
        // 8 * sum_{a=1..d} (d - a) + 4d + 2
        Topology::Mesh3d { .. } => {
            let mut shell = 0u64;
            for a in 1..=d {
                shell += d - a;
            }
            8 * shell + 4 * d + 2
        }
    })
}

/// Number of modules with hop distance 1 to `d` — the prefix sum of
/// [`neighbors_at_distance`]. Reproduces the ring (`2d`) and 2D-mesh
/// (`2d(d+1)`) closed forms exactly.
pub fn cumulative_within(topo: &Topology, d: u32) -> Result<u64> {
    if d < 1 {
        return Err(Error::invalid_input("hop distance must be at least 1"));
    }
    let mut total = 0u64;
    for a in 1..=d {
        total += neighbors_at_distance(topo, a)?;
    }
    Ok(total)
}

/// Spatial hop distribution: probability that a packet travels farther than
/// `d` hops, `(1 - p)^s(d)`.
pub fn hop_exceedance(topo: &Topology, p: f64, d: u32) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid_input(format!(
            "acceptance probability must be in (0, 1], got {p}"
        )));
    }
    let s = cumulative_within(topo, d)?;
    Ok((1.0 - p).powi(s as i32))
}

/// Temporal shape of a module's packet injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionDistribution {
    Gaussian,
    Exponential,
}

/// Seeded per-slot packet-injection process for one master module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionModel {
    pub distribution: InjectionDistribution,
    /// Expected packets per observation slot.
    pub mean_rate: f64,
    /// Standard deviation of the Gaussian injection; ignored for the
    /// exponential distribution.
    #[serde(default)]
    pub sigma: f64,
    pub seed: u64,
}

impl InjectionModel {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_rate.is_finite() || self.mean_rate < 0.0 {
            return Err(Error::invalid_input("mean_rate must be finite and non-negative"));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid_input("sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Draw a reproducible per-slot packet-count series.
///
/// Gaussian samples are clamped at zero and rounded; exponential samples
/// are rounded. The same `(model, slots)` with the same seed yields a
/// bit-identical series.
pub fn draw_injection(
    model: &InjectionModel,
    slots: usize,
    slot_cycles: u32,
) -> Result<ObservationSeries> {
    if slots == 0 {
        return Err(Error::invalid_input("slots must be at least 1"));
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let samples = match model.distribution {
        InjectionDistribution::Gaussian => {
            let normal = Normal::new(model.mean_rate, model.sigma)
                .map_err(|e| Error::invalid_input(format!("bad Gaussian parameters: {e}")))?;
            (0..slots)
                .map(|_| normal.sample(&mut rng).max(0.0).round() as u64)
                .collect()
        }
        InjectionDistribution::Exponential => {
            if model.mean_rate == 0.0 {
                vec![0; slots]
            } else {
                let exp = Exp::new(1.0 / model.mean_rate)
                    .map_err(|e| Error::invalid_input(format!("bad exponential rate: {e}")))?;
                (0..slots).map(|_| exp.sample(&mut rng).round() as u64).collect()
            }
        }
    };
    ObservationSeries::new(samples, slot_cycles)
}
