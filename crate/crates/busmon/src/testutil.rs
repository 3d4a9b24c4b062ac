//! Shared scenario fixtures for unit tests.

use crate::sim::{ChannelSpec, ModuleDesc, Role, SocConfig};
use crate::traffic::{InjectionDistribution, InjectionModel, Topology};

pub fn gaussian(mean: f64, sigma: f64, seed: u64) -> InjectionModel {
    InjectionModel {
        distribution: InjectionDistribution::Gaussian,
        mean_rate: mean,
        sigma,
        seed,
    }
}

/// `count` masters, each with its own slave and channel; cpu0 is trusted.
pub fn multi_master_config(count: usize, mean: f64, sigma: f64, slots: usize) -> SocConfig {
    let mut modules = Vec::new();
    let mut channels = Vec::new();
    for i in 0..count {
        modules.push(ModuleDesc {
            id: format!("cpu{i}"),
            role: Role::Master,
            trusted: i == 0,
            injection: Some(gaussian(mean, sigma, i as u64 + 1)),
        });
        modules.push(ModuleDesc {
            id: format!("uart{i}"),
            role: Role::Slave,
            trusted: false,
            injection: None,
        });
        channels.push(ChannelSpec {
            master: format!("cpu{i}"),
            slave: format!("uart{i}"),
        });
    }
    SocConfig {
        modules,
        channels,
        topology: Topology::mesh2d(4, 4).unwrap(),
        total_slots: slots,
        slot_cycles: 100,
    }
}

pub fn four_master_config(mean: f64, sigma: f64, slots: usize) -> SocConfig {
    multi_master_config(4, mean, sigma, slots)
}
