//! Delay-optimal state-independent routing.
//!
//! Each class runs as a bank of independent M/G/1-PS queues; the optimum
//! fills the fastest classes first with loads `1 - theta / sqrt(C_i)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::stability::static_limit;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticRoutingSolution {
    /// Number of classes that receive traffic (`j*`, one-based count).
    pub active_set_size: usize,
    /// Per-server load in each class.
    pub loads: Vec<f64>,
    /// Probability that a job is sent to each class.
    pub probabilities: Vec<f64>,
    /// Mean sojourn time of a job.
    pub mean_sojourn: f64,
}

/// Mean sojourn time of independent PS servers at per-class loads `rho`:
/// `(1/lambda) sum_j gamma_j rho_j / (1 - rho_j)`.
pub fn static_mean_sojourn(config: &SystemConfig, loads: &[f64]) -> f64 {
    let occupancy: f64 = loads
        .iter()
        .enumerate()
        .map(|(j, &rho)| config.fraction(j) * rho / (1.0 - rho))
        .sum();
    occupancy / config.arrival_rate()
}

/// Routing probabilities implied by per-class loads,
/// `p_j = rho_j gamma_j mu C_j / lambda`.
pub fn probabilities_from_loads(config: &SystemConfig, loads: &[f64]) -> Vec<f64> {
    let scale = config.mu() / config.arrival_rate();
    loads
        .iter()
        .enumerate()
        .map(|(j, &rho)| rho * config.fraction(j) * config.capacity(j) * scale)
        .collect()
}

/// Closed-form optimal state-independent routing.
pub fn solve_static(config: &SystemConfig) -> Result<StaticRoutingSolution> {
    let lambda = config.arrival_rate();
    let limit = static_limit(config);
    if lambda >= limit {
        return Err(Error::Unstable { lambda, limit });
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidArrivalRate(lambda));
    }
    let offered = lambda / config.mu();

    // j* is the largest prefix length passing the activation test; a
    // nonpositive spare capacity means the prefix cannot carry the load
    // alone, so the test passes.
    let (mut work, mut root_work) = (0.0, 0.0);
    let mut active = 0;
    for (j, class) in config.classes().iter().enumerate() {
        work += class.fraction * class.capacity;
        root_work += class.fraction * libm::sqrt(class.capacity);
        let spare = work - offered;
        if spare <= 0.0 || 1.0 / libm::sqrt(class.capacity) < root_work / spare {
            active = j + 1;
        }
    }

    let classes = &config.classes()[..active];
    let spare = classes.iter().map(|c| c.fraction * c.capacity).sum::<f64>() - offered;
    let root_work: f64 = classes.iter().map(|c| c.fraction * libm::sqrt(c.capacity)).sum();
    let level = spare / root_work;
    let loads: Vec<f64> = config
        .classes()
        .iter()
        .enumerate()
        .map(|(j, c)| if j < active { 1.0 - level / libm::sqrt(c.capacity) } else { 0.0 })
        .collect();

    let probabilities = probabilities_from_loads(config, &loads);
    let mean_sojourn = static_mean_sojourn(config, &loads);
    Ok(StaticRoutingSolution { active_set_size: active, loads, probabilities, mean_sojourn })
}
