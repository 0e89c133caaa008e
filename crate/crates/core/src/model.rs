//! Shared domain types: server classes, the system configuration and
//! truncated tail vectors.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default number of retained occupancy levels above zero.
pub const DEFAULT_TRUNCATION: usize = 64;

/// Largest value a stored tail may take at its last retained level.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-14;

/// Fractions within this distance of summing to one are accepted as-is.
const FRACTION_SUM_EXACT: f64 = 1e-12;
/// Fractions within this distance are silently renormalized.
const FRACTION_SUM_RENORMALIZE: f64 = 1e-9;

/// One server speed together with the share of servers running at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerClass {
    /// Work units processed per unit time.
    pub capacity: f64,
    /// Fraction of the server population in this class.
    pub fraction: f64,
}

impl ServerClass {
    pub const fn new(capacity: f64, fraction: f64) -> Self {
        Self { capacity, fraction }
    }
}

/// A validated system: classes ordered by descending capacity, the
/// per-server arrival rate and the inverse mean job size.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    classes: Vec<ServerClass>,
    arrival_rate: f64,
    mu: f64,
}

impl SystemConfig {
    /// Validates and normalizes a candidate configuration.
    ///
    /// Classes are sorted by descending capacity (stable, so equal
    /// capacities keep their input order). Fractions that miss summing to
    /// one by less than `1e-9` are renormalized; larger gaps are rejected.
    pub fn new(classes: Vec<ServerClass>, arrival_rate: f64, mu: f64) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyClassList);
        }
        for (class, c) in classes.iter().enumerate() {
            if !(c.capacity.is_finite() && c.capacity > 0.0) {
                return Err(Error::NonPositiveCapacity { class, capacity: c.capacity });
            }
            if !(c.fraction.is_finite() && c.fraction > 0.0 && c.fraction <= 1.0) {
                return Err(Error::NonPositiveFraction { class, fraction: c.fraction });
            }
        }
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(Error::InvalidArrivalRate(arrival_rate));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidServiceRate(mu));
        }

        let mut classes = classes;
        let sum: f64 = classes.iter().map(|c| c.fraction).sum();
        let gap = (sum - 1.0).abs();
        if gap > FRACTION_SUM_RENORMALIZE {
            return Err(Error::FractionsDontSumToOne { sum });
        }
        if gap > FRACTION_SUM_EXACT {
            for c in &mut classes {
                c.fraction /= sum;
            }
        }

        classes.sort_by(|a, b| b.capacity.total_cmp(&a.capacity));
        if classes.windows(2).any(|w| w[0].capacity == w[1].capacity) {
            log::warn!("duplicate server capacities kept as distinct classes");
        }

        Ok(Self { classes, arrival_rate, mu })
    }

    /// Same classes and `mu`, different arrival rate.
    pub fn with_arrival_rate(&self, arrival_rate: f64) -> Result<Self> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(Error::InvalidArrivalRate(arrival_rate));
        }
        Ok(Self { arrival_rate, ..self.clone() })
    }

    pub fn classes(&self) -> &[ServerClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn capacity(&self, class: usize) -> f64 {
        self.classes[class].capacity
    }

    pub fn fraction(&self, class: usize) -> f64 {
        self.classes[class].fraction
    }

    /// Per-server arrival rate `lambda`.
    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    /// Inverse mean job size `mu`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Offered load of a single class-`class` server, `lambda / (mu C_j)`.
    pub fn nu(&self, class: usize) -> f64 {
        self.arrival_rate / (self.mu * self.classes[class].capacity)
    }

    pub fn nus(&self) -> Vec<f64> {
        (0..self.classes.len()).map(|j| self.nu(j)).collect()
    }

    /// Average capacity per server, `sum_j gamma_j C_j`.
    pub fn mean_capacity(&self) -> f64 {
        self.classes.iter().map(|c| c.fraction * c.capacity).sum()
    }

    /// `lambda / (mu sum_j gamma_j C_j)`.
    pub fn normalized_load(&self) -> f64 {
        self.arrival_rate / (self.mu * self.mean_capacity())
    }

    pub fn has_duplicate_capacities(&self) -> bool {
        self.classes.windows(2).any(|w| w[0].capacity == w[1].capacity)
    }
}

/// Truncated tail probabilities `P_0 = 1 >= P_1 >= ... >= P_K >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailVector {
    values: Vec<f64>,
}

impl TailVector {
    /// Checks the tail invariants, including `P_K <= DEFAULT_TAIL_TOLERANCE`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, DEFAULT_TAIL_TOLERANCE)
    }

    /// Like [`TailVector::new`] with a caller-chosen bound on the last level.
    /// Empirical estimates use a bound of one.
    pub fn with_tolerance(values: Vec<f64>, tail_tolerance: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("tail vector needs at least two levels"));
        }
        if values[0] != 1.0 {
            return Err(Error::InvalidArgument("tail vector must start at exactly 1"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("tail values must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("tail values must be nonincreasing"));
        }
        if values[values.len() - 1] > tail_tolerance {
            return Err(Error::InvalidArgument("tail mass at the truncation level is too large"));
        }
        Ok(Self { values })
    }

    /// The last retained level `K`.
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P_k`, with zero beyond the truncation.
    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Mean occupancy `sum_{k >= 1} P_k`.
    pub fn mean(&self) -> f64 {
        self.values[1..].iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// One tail vector per server class, all with the same truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFamily {
    per_class: Vec<TailVector>,
}

impl TailFamily {
    pub fn new(per_class: Vec<TailVector>) -> Result<Self> {
        let Some(first) = per_class.first() else {
            return Err(Error::EmptyClassList);
        };
        let k = first.truncation();
        if per_class.iter().any(|t| t.truncation() != k) {
            return Err(Error::InvalidArgument("tail vectors have different truncations"));
        }
        Ok(Self { per_class })
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn truncation(&self) -> usize {
        self.per_class[0].truncation()
    }

    pub fn class(&self, j: usize) -> &TailVector {
        &self.per_class[j]
    }

    pub fn classes(&self) -> &[TailVector] {
        &self.per_class
    }

    /// `P_k^(j)`, zero beyond the truncation.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.per_class[j].get(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_class() -> SystemConfig {
        SystemConfig::new(
            vec![ServerClass::new(2.0 / 3.0, 0.5), ServerClass::new(4.0 / 3.0, 0.5)],
            0.5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn sorts_descending_and_computes_nu() {
        let cfg = two_class();
        assert_eq!(cfg.capacity(0), 4.0 / 3.0);
        assert_eq!(cfg.capacity(1), 2.0 / 3.0);
        assert!((cfg.nu(0) - 0.375).abs() < 1e-15);
        assert!((cfg.nu(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_single_class() {
        let cfg = SystemConfig::new(vec![ServerClass::new(1.0, 1.0)], 0.9, 1.0).unwrap();
        assert_eq!(cfg.nus(), vec![0.9]);
        assert!(!cfg.has_duplicate_capacities());
    }

    #[test]
    fn rejects_bad_fractions() {
        let err = SystemConfig::new(
            vec![ServerClass::new(1.0, 0.3), ServerClass::new(2.0, 0.3)],
            0.5,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::FractionsDontSumToOne { .. }));
    }

    #[test]
    fn renormalizes_tiny_gap() {
        let cfg = SystemConfig::new(
            vec![ServerClass::new(1.0, 0.5 + 2e-10), ServerClass::new(2.0, 0.5)],
            0.5,
            1.0,
        )
        .unwrap();
        let sum: f64 = cfg.classes().iter().map(|c| c.fraction).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert_eq!(SystemConfig::new(vec![], 0.5, 1.0), Err(Error::EmptyClassList));
        assert!(matches!(
            SystemConfig::new(vec![ServerClass::new(0.0, 1.0)], 0.5, 1.0),
            Err(Error::NonPositiveCapacity { .. })
        ));
        assert!(matches!(
            SystemConfig::new(vec![ServerClass::new(1.0, 1.0)], -0.1, 1.0),
            Err(Error::InvalidArrivalRate(_))
        ));
        assert!(matches!(
            SystemConfig::new(vec![ServerClass::new(1.0, 1.0)], 0.1, 0.0),
            Err(Error::InvalidServiceRate(_))
        ));
    }

    #[test]
    fn duplicates_are_kept() {
        let cfg = SystemConfig::new(
            vec![ServerClass::new(1.0, 0.5), ServerClass::new(1.0, 0.5)],
            0.5,
            1.0,
        )
        .unwrap();
        assert_eq!(cfg.num_classes(), 2);
        assert!(cfg.has_duplicate_capacities());
    }

    #[test]
    fn tail_vector_invariants() {
        assert!(TailVector::new(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(TailVector::new(vec![0.9, 0.5, 0.0]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, 0.6, 0.0]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, -0.1]).is_err());
        assert!(TailVector::new(vec![1.0, 0.5, 1e-3]).is_err());
        assert!(TailVector::with_tolerance(vec![1.0, 0.5, 1e-3], 1.0).is_ok());
        let t = TailVector::new(vec![1.0, 0.5, 0.25, 0.0]).unwrap();
        assert_eq!(t.truncation(), 3);
        assert_eq!(t.get(10), 0.0);
        assert_eq!(t.mean(), 0.75);
    }

    #[test]
    fn family_requires_equal_truncation() {
        let a = TailVector::new(vec![1.0, 0.0]).unwrap();
        let b = TailVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(TailFamily::new(vec![a.clone(), b]).is_err());
        assert!(TailFamily::new(vec![a.clone(), a]).is_ok());
    }
}
