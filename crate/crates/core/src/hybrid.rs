//! Hybrid routing: pick a class with bias `p`, then SQ(2) inside the class.
//!
//! Each class then behaves as a homogeneous SQ(2) system at load `rho_j`,
//! whose tails are `rho_j^(2^k - 1)`. The delay-optimal loads solve a
//! separable convex problem; its stationarity condition reads
//! `phi_inverse(rho_j) = theta C_j` on the active classes.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{SystemConfig, TailVector};
use crate::static_routing::probabilities_from_loads;
use crate::stability::static_limit;

/// Relative size below which series terms are dropped.
const SERIES_REL_TOL: f64 = 1e-16;
const MAX_BISECTIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    /// Number of classes that receive traffic.
    pub active_set_size: usize,
    /// Multiplier of the work-conservation constraint.
    pub theta_star: f64,
    pub loads: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub mean_sojourn: f64,
}

/// `sum_{k >= 1} (2^k - 1) rho^(2^k - 2)`, the marginal cost of load in one
/// SQ(2) class (derivative of `sum_k rho^(2^k - 1)`).
pub fn phi_inverse(rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::DomainError { value: rho });
    }
    // power = rho^(2^k - 2); next power = (rho * power)^2
    let mut sum = 0.0;
    let mut power = 1.0f64;
    let mut weight = 1.0f64;
    loop {
        let term = weight * power;
        sum += term;
        if term < SERIES_REL_TOL * sum || term == 0.0 {
            return Ok(sum);
        }
        let lifted = rho * power;
        power = lifted * lifted;
        weight = 2.0 * weight + 1.0;
    }
}

/// Inverse of [`phi_inverse`], extended by zero on `x <= 1`.
pub fn phi(x: f64) -> f64 {
    if x.is_nan() || x <= 1.0 {
        return 0.0;
    }
    let eval = |rho: f64| phi_inverse(rho).expect("bisection stays in [0, 1)");
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while eval(hi) < x {
        lo = hi;
        hi = 0.5 * (hi + 1.0);
        if hi >= 1.0 {
            return lo;
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Load carried by the `prefix_len` fastest classes at multiplier `theta`:
/// `mu sum_{i < prefix_len} gamma_i C_i phi(theta C_i)`.
pub fn psi_inverse(prefix_len: usize, theta: f64, config: &SystemConfig) -> f64 {
    config.classes()[..prefix_len]
        .iter()
        .map(|c| c.fraction * c.capacity * phi(theta * c.capacity))
        .sum::<f64>()
        * config.mu()
}

/// Multiplier at which the `prefix_len` fastest classes carry `lambda`.
pub fn psi(prefix_len: usize, lambda: f64, config: &SystemConfig) -> Result<f64> {
    if prefix_len == 0 || prefix_len > config.num_classes() {
        return Err(Error::InvalidArgument("prefix length out of range"));
    }
    let sup = config.mu()
        * config.classes()[..prefix_len].iter().map(|c| c.fraction * c.capacity).sum::<f64>();
    if !(lambda < sup) {
        return Err(Error::Unreachable { target: lambda, sup });
    }
    let floor = 1.0 / config.capacity(0);
    if lambda <= 0.0 {
        return Ok(floor);
    }
    let (mut lo, mut hi) = (floor, 2.0 * floor);
    while psi_inverse(prefix_len, hi, config) < lambda {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi_inverse(prefix_len, mid, config) < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Homogeneous SQ(2) tails `rho^(2^k - 1)` for `k = 0..=truncation`.
pub fn hybrid_tails(rho: f64, truncation: usize) -> Result<TailVector> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::DomainError { value: rho });
    }
    let mut values = Vec::with_capacity(truncation + 1);
    values.push(1.0);
    let mut p = 1.0f64;
    for _ in 0..truncation {
        p *= rho * p;
        values.push(p);
    }
    TailVector::new(values)
}

/// `sum_{k >= 1} rho^(2^k - 1)`: mean occupancy of a homogeneous SQ(2) server.
pub fn sq2_occupancy(rho: f64) -> f64 {
    let mut sum = 0.0;
    let mut p = 1.0f64;
    loop {
        p *= rho * p;
        sum += p;
        if p < SERIES_REL_TOL * sum || p == 0.0 {
            return sum;
        }
    }
}

/// Mean sojourn time of hybrid routing at per-class loads `rho`:
/// `(1/lambda) sum_j gamma_j sum_{k >= 1} rho_j^(2^k - 1)`.
pub fn hybrid_mean_sojourn(config: &SystemConfig, loads: &[f64]) -> f64 {
    let occupancy: f64 =
        loads.iter().enumerate().map(|(j, &rho)| config.fraction(j) * sq2_occupancy(rho)).sum();
    occupancy / config.arrival_rate()
}

/// Delay-optimal class bias for hybrid routing.
pub fn solve_hybrid(config: &SystemConfig) -> Result<HybridSolution> {
    let lambda = config.arrival_rate();
    let limit = static_limit(config);
    if lambda >= limit {
        return Err(Error::Unstable { lambda, limit });
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidArrivalRate(lambda));
    }

    // A prefix that cannot carry lambda on its own fails the activation test.
    let mut active = 0;
    let mut prefix_work = 0.0;
    for (j, class) in config.classes().iter().enumerate() {
        prefix_work += class.fraction * class.capacity;
        if lambda < config.mu() * prefix_work {
            let theta = psi(j + 1, lambda, config)?;
            if 1.0 / class.capacity < theta {
                active = j + 1;
            }
        }
    }
    if active == 0 {
        return Err(Error::Unreachable { target: lambda, sup: limit });
    }

    let theta_star = psi(active, lambda, config)?;
    let loads: Vec<f64> = config
        .classes()
        .iter()
        .enumerate()
        .map(|(j, c)| if j < active { phi(theta_star * c.capacity) } else { 0.0 })
        .collect();
    let probabilities = probabilities_from_loads(config, &loads);
    let mean_sojourn = hybrid_mean_sojourn(config, &loads);
    Ok(HybridSolution { active_set_size: active, theta_star, loads, probabilities, mean_sojourn })
}

/// Largest violation of the optimality conditions: `|phi_inverse(rho_j) -
/// theta C_j|` on active classes and `max(0, theta - 1/C_j)` on idle ones.
pub fn kkt_residual(config: &SystemConfig, solution: &HybridSolution) -> Result<f64> {
    let mut worst = 0.0f64;
    for (j, (&rho, class)) in solution.loads.iter().zip(config.classes()).enumerate() {
        let r = if j < solution.active_set_size {
            (phi_inverse(rho)? - solution.theta_star * class.capacity).abs()
        } else {
            (solution.theta_star - 1.0 / class.capacity).max(0.0)
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Capacity-proportional bias `p_i = gamma_i C_i / sum_j gamma_j C_j`; it
/// equalizes the class loads and so keeps the full static stability region.
pub fn proportional_bias(config: &SystemConfig) -> Vec<f64> {
    let total = config.mean_capacity();
    config.classes().iter().map(|c| c.fraction * c.capacity / total).collect()
}
