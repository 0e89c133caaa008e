//! Stability regions of the static, finite-N SQ(2) and asymptotic SQ(2)
//! schemes.
//!
//! All limits are suprema of open intervals: an arrival rate equal to the
//! returned limit is unstable.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// Largest class count for which subsets are enumerated exactly.
pub const MAX_SUBSET_CLASSES: usize = 24;

/// Budget for count-vector enumeration in [`finite_n_limit`].
pub const MAX_COUNT_VECTORS: u128 = 10_000_000;

/// How far `N * gamma_j` may be from an integer and still count as one.
const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Supremum of the static-scheme region, `mu sum_j gamma_j C_j`.
    pub static_limit: f64,
    /// Supremum of the asymptotic SQ(2) region.
    pub asymptotic_sq2_limit: f64,
    /// Supremum of the SQ(2) region with the requested number of servers.
    pub finite_n_limit: Option<f64>,
    /// Zero-based class indices of a subset attaining the asymptotic minimum.
    pub binding_subset: Vec<usize>,
}

/// `mu sum_j gamma_j C_j`; the arrival rate of `config` is ignored.
pub fn static_limit(config: &SystemConfig) -> f64 {
    config.mu() * config.mean_capacity()
}

/// Supremum of the asymptotic SQ(2) stability region together with one
/// minimizing class subset (zero-based, ascending).
///
/// `mu * min_I (sum_{j in I} gamma_j C_j) / (sum_{j in I} gamma_j)^2` over all
/// nonempty subsets `I`.
pub fn asymptotic_sq2_limit(config: &SystemConfig) -> Result<(f64, Vec<usize>)> {
    let m = config.num_classes();
    if m > MAX_SUBSET_CLASSES {
        return Err(Error::TooManyClasses { classes: m, max: MAX_SUBSET_CLASSES });
    }
    let mut best = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 1u32..(1u32 << m) {
        let (mut work, mut share) = (0.0, 0.0);
        for j in members(mask, m) {
            work += config.fraction(j) * config.capacity(j);
            share += config.fraction(j);
        }
        let ratio = work / (share * share);
        if ratio < best {
            best = ratio;
            best_mask = mask;
        }
    }
    Ok((config.mu() * best, members(best_mask, m).collect()))
}

/// Subset form of the asymptotic condition:
/// `sum_{j in I} gamma_j / nu_j > (sum_{j in I} gamma_j)^2` for every
/// nonempty `I`.
///
/// Evaluated independently of [`asymptotic_sq2_limit`]; the two agree away
/// from the boundary. A zero arrival rate is always stable.
pub fn check_subset_condition(config: &SystemConfig) -> Result<bool> {
    let m = config.num_classes();
    if m > MAX_SUBSET_CLASSES {
        return Err(Error::TooManyClasses { classes: m, max: MAX_SUBSET_CLASSES });
    }
    if config.arrival_rate() == 0.0 {
        return Ok(true);
    }
    let nus = config.nus();
    for mask in 1u32..(1u32 << m) {
        let (mut lhs, mut share) = (0.0, 0.0);
        for j in members(mask, m) {
            lhs += config.fraction(j) / nus[j];
            share += config.fraction(j);
        }
        if lhs <= share * share {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Number of servers in each class when there are `n` servers in total.
pub fn class_sizes(config: &SystemConfig, n: usize) -> Result<Vec<usize>> {
    config
        .classes()
        .iter()
        .enumerate()
        .map(|(class, c)| {
            let size = n as f64 * c.fraction;
            let rounded = libm::round(size);
            if (size - rounded).abs() > INTEGRALITY_TOL * (n as f64).max(1.0) || rounded < 1.0 {
                Err(Error::NonIntegerClassSizes { n, class })
            } else {
                Ok(rounded as usize)
            }
        })
        .collect()
}

/// Smallest `N > 2` for which every class has a positive integral number of
/// servers, searching up to `max_n`.
pub fn minimal_server_count(config: &SystemConfig, max_n: usize) -> Option<usize> {
    (3..=max_n).find(|&n| class_sizes(config, n).is_ok())
}

/// Supremum of the SQ(2) stability region with `n` servers.
///
/// Servers of one class are interchangeable, so the maximum over server
/// subsets `B` (with `|B| >= 2`) reduces to a minimum over class count
/// vectors `0 <= a_j <= N gamma_j`:
/// `mu * min (sum_j a_j C_j)(N - 1) / (|a| (|a| - 1))`.
pub fn finite_n_limit(config: &SystemConfig, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::NTooSmall { n, min: 2 });
    }
    let sizes = class_sizes(config, n)?;
    let combinations = sizes.iter().map(|&s| s as u128 + 1).product::<u128>();
    if combinations > MAX_COUNT_VECTORS {
        return Err(Error::TooManyCombinations { combinations, max: MAX_COUNT_VECTORS });
    }

    let caps: Vec<f64> = config.classes().iter().map(|c| c.capacity).collect();
    let mut counts = alloc::vec![0usize; sizes.len()];
    let mut best = f64::INFINITY;
    loop {
        let total: usize = counts.iter().sum();
        if total >= 2 {
            let work: f64 = counts.iter().zip(&caps).map(|(&a, c)| a as f64 * c).sum();
            let ratio = work * (n as f64 - 1.0) / (total as f64 * (total as f64 - 1.0));
            best = best.min(ratio);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == counts.len() {
                return Ok(config.mu() * best);
            }
            if counts[pos] < sizes[pos] {
                counts[pos] += 1;
                break;
            }
            counts[pos] = 0;
            pos += 1;
        }
    }
}

/// All three limits at once; the finite-N limit only when `n` is given.
pub fn report(config: &SystemConfig, n: Option<usize>) -> Result<StabilityReport> {
    let (asymptotic_sq2_limit, binding_subset) = asymptotic_sq2_limit(config)?;
    let finite_n_limit = n.map(|n| finite_n_limit(config, n)).transpose()?;
    Ok(StabilityReport {
        static_limit: static_limit(config),
        asymptotic_sq2_limit,
        finite_n_limit,
        binding_subset,
    })
}

fn members(mask: u32, m: usize) -> impl Iterator<Item = usize> {
    (0..m).filter(move |j| mask & (1 << j) != 0)
}
