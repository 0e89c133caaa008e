//! Closed-form relations satisfied by the mean-field equilibrium and the
//! performance measures read off it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{SystemConfig, TailFamily};

fn check_shape(tails: &TailFamily, config: &SystemConfig) -> Result<()> {
    if tails.num_classes() != config.num_classes() {
        return Err(Error::InvalidArgument("tails and config have different class counts"));
    }
    Ok(())
}

/// Right-hand side of the level recursion for `P_{k+1}^(j)`, every class:
///
/// `nu_j [ gamma_j (P_k^(j))^2 + P_k^(j) sum_{i != j} gamma_i P_k^(i)
///        + sum_{i != j} sum_{l >= k} gamma_i (P_{l+1}^(i) P_l^(j) - P_l^(i) P_{l+1}^(j)) ]`
///
/// with the inner sum truncated at the last retained level.
pub fn next_tail_levels(tails: &TailFamily, config: &SystemConfig, k: usize) -> Result<Vec<f64>> {
    check_shape(tails, config)?;
    let top = tails.truncation();
    if k >= top {
        return Err(Error::InvalidArgument("level must be below the truncation"));
    }
    let m = tails.num_classes();
    let p = |j: usize, l: usize| tails.get(j, l);
    Ok((0..m)
        .map(|j| {
            let gamma_j = config.fraction(j);
            let mut bracket = gamma_j * p(j, k) * p(j, k);
            for i in (0..m).filter(|&i| i != j) {
                let gamma_i = config.fraction(i);
                bracket += p(j, k) * gamma_i * p(i, k);
                let mut cross = 0.0;
                for l in k..=top {
                    cross += p(i, l + 1) * p(j, l) - p(i, l) * p(j, l + 1);
                }
                bracket += gamma_i * cross;
            }
            config.nu(j) * bracket
        })
        .collect())
}

/// `max_{k < K, j} |next_tail_levels(k)_j - P_{k+1}^(j)|`.
pub fn recurrence_residual(tails: &TailFamily, config: &SystemConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..tails.truncation() {
        for (j, next) in next_tail_levels(tails, config, k)?.into_iter().enumerate() {
            worst = worst.max((next - tails.get(j, k + 1)).abs());
        }
    }
    Ok(worst)
}

/// `max_k |sum_j (gamma_j / nu_j) P_{k+1}^(j) - (sum_j gamma_j P_k^(j))^2|`.
///
/// With a zero arrival rate the identity degenerates to `P_k = 0` for
/// `k >= 1`; the residual is then zero for the empty state and infinite
/// otherwise.
pub fn consistency_residual(tails: &TailFamily, config: &SystemConfig) -> Result<f64> {
    check_shape(tails, config)?;
    let m = tails.num_classes();
    if config.arrival_rate() == 0.0 {
        let empty = tails.classes().iter().all(|t| t.values()[1..].iter().all(|&x| x == 0.0));
        return Ok(if empty { 0.0 } else { f64::INFINITY });
    }
    let weights: Vec<f64> = (0..m).map(|j| config.fraction(j) / config.nu(j)).collect();
    let mut worst = 0.0f64;
    for k in 0..tails.truncation() {
        let lhs: f64 = (0..m).map(|j| weights[j] * tails.get(j, k + 1)).sum();
        let mixed: f64 = (0..m).map(|j| config.fraction(j) * tails.get(j, k)).sum();
        worst = worst.max((lhs - mixed * mixed).abs());
    }
    Ok(worst)
}

/// Arrival intensity seen by a tagged server holding `k` jobs at
/// equilibrium: `lambda sum_i gamma_i (P_k^(i) + P_{k+1}^(i))`.
pub fn state_dependent_rate(tails: &TailFamily, config: &SystemConfig, k: usize) -> Result<f64> {
    check_shape(tails, config)?;
    if k >= tails.truncation() {
        return Err(Error::InvalidArgument("level must be below the truncation"));
    }
    let mixed: f64 = (0..tails.num_classes())
        .map(|i| config.fraction(i) * (tails.get(i, k) + tails.get(i, k + 1)))
        .sum();
    Ok(config.arrival_rate() * mixed)
}

/// Mean sojourn time `(1/lambda) sum_j sum_{k >= 1} gamma_j P_k^(j)`
/// (Little's law over the truncated tails).
pub fn mean_sojourn_from_tails(tails: &TailFamily, config: &SystemConfig) -> Result<f64> {
    check_shape(tails, config)?;
    let lambda = config.arrival_rate();
    if lambda <= 0.0 {
        return Err(Error::InvalidArrivalRate(lambda));
    }
    let occupancy: f64 = tails
        .classes()
        .iter()
        .enumerate()
        .map(|(j, t)| config.fraction(j) * t.mean())
        .sum();
    Ok(occupancy / lambda)
}

/// Safety term for the truncated sojourn sum: `(K / lambda) sum_j gamma_j P_K^(j)`.
pub fn sojourn_truncation_bound(tails: &TailFamily, config: &SystemConfig) -> f64 {
    let top = tails.truncation();
    let mass: f64 = (0..tails.num_classes()).map(|j| config.fraction(j) * tails.get(j, top)).sum();
    top as f64 * mass / config.arrival_rate()
}

/// Long-run probability that a job joins a class-`j` server,
/// `gamma_j P_1^(j) / nu_j`.
pub fn class_join_probability(tails: &TailFamily, config: &SystemConfig, j: usize) -> f64 {
    config.fraction(j) * tails.get(j, 1) / config.nu(j)
}

pub fn class_join_probabilities(tails: &TailFamily, config: &SystemConfig) -> Vec<f64> {
    (0..config.num_classes()).map(|j| class_join_probability(tails, config, j)).collect()
}
