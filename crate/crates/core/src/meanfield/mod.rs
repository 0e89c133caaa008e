//! Mean-field limit of SQ(2) routing over heterogeneous PS servers.
//!
//! The state is a family of occupancy tails `u_n^(j)`: the fraction of
//! class-`j` servers holding at least `n` jobs. All vectors are truncated at
//! a common level `K`, with `u_{K+1} = 0` wherever the dynamics look one
//! level past the end.

mod equilibrium;
mod identities;
mod ode;

pub use equilibrium::{
    fixed_point, fixed_point_with, EquilibriumMethod, EquilibriumResult, FixedPointOptions,
    CERTIFIED_DRIFT, CERTIFIED_RECURRENCE,
};
pub use identities::{
    class_join_probabilities, class_join_probability, consistency_residual,
    mean_sojourn_from_tails, next_tail_levels, recurrence_residual, sojourn_truncation_bound,
    state_dependent_rate,
};
pub use ode::{drift, integrate, Drift, Horizon, IntegrateOptions, Trajectory};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{TailFamily, TailVector, DEFAULT_TAIL_TOLERANCE};

/// A point of the mean-field trajectory: per-class tails at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    /// Row-major, one row of `levels` entries per class.
    values: Vec<f64>,
    classes: usize,
    levels: usize,
    time: f64,
}

impl MeanFieldState {
    /// Builds a state from per-class tails, checking `u_0 = 1`, monotonicity
    /// and nonnegativity.
    pub fn new(per_class: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        let classes = per_class.len();
        if classes == 0 {
            return Err(Error::EmptyClassList);
        }
        let levels = per_class[0].len();
        if levels < 2 || per_class.iter().any(|v| v.len() != levels) {
            return Err(Error::InvalidArgument("classes need equal lengths of at least two"));
        }
        for v in &per_class {
            if v[0] != 1.0
                || v.iter().any(|x| !x.is_finite() || *x < 0.0)
                || v.windows(2).any(|w| w[1] > w[0])
            {
                return Err(Error::InvalidArgument("state is not a monotone tail starting at 1"));
            }
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidArgument("time must be finite and nonnegative"));
        }
        let values = per_class.into_iter().flatten().collect();
        Ok(Self { values, classes, levels, time })
    }

    /// Every server empty: `u_0 = 1`, zero elsewhere.
    pub fn empty(classes: usize, truncation: usize) -> Self {
        let levels = truncation + 1;
        let mut values = vec![0.0; classes * levels];
        for j in 0..classes {
            values[j * levels] = 1.0;
        }
        Self { values, classes, levels, time: 0.0 }
    }

    pub fn from_family(tails: &TailFamily) -> Self {
        let classes = tails.num_classes();
        let levels = tails.truncation() + 1;
        let values = tails.classes().iter().flat_map(|t| t.values().iter().copied()).collect();
        Self { values, classes, levels, time: 0.0 }
    }

    pub(crate) fn from_raw(values: Vec<f64>, classes: usize, levels: usize, time: f64) -> Self {
        debug_assert_eq!(values.len(), classes * levels);
        Self { values, classes, levels, time }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn truncation(&self) -> usize {
        self.levels - 1
    }

    pub fn class(&self, j: usize) -> &[f64] {
        &self.values[j * self.levels..(j + 1) * self.levels]
    }

    pub fn get(&self, j: usize, n: usize) -> f64 {
        if n < self.levels {
            self.values[j * self.levels + n]
        } else {
            0.0
        }
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.values
    }

    /// `sum_j gamma_j sum_{n >= 1} u_n^(j)`, the mean number of jobs per server.
    pub fn mean_occupancy(&self, fractions: &[f64]) -> f64 {
        (0..self.classes).map(|j| fractions[j] * self.class(j)[1..].iter().sum::<f64>()).sum()
    }

    /// Largest tail value at the truncation level across classes.
    pub fn boundary_mass(&self) -> f64 {
        (0..self.classes).map(|j| self.class(j)[self.levels - 1]).fold(0.0, f64::max)
    }

    /// Converts to a tail family, which additionally requires the last level
    /// to be below the default tail tolerance.
    pub fn to_family(&self) -> Result<TailFamily> {
        self.to_family_with_tolerance(DEFAULT_TAIL_TOLERANCE)
    }

    pub fn to_family_with_tolerance(&self, tail_tolerance: f64) -> Result<TailFamily> {
        let per_class = (0..self.classes)
            .map(|j| TailVector::with_tolerance(self.class(j).to_vec(), tail_tolerance))
            .collect::<Result<Vec<_>>>()?;
        TailFamily::new(per_class)
    }
}

/// Weighted sup norm `sup_j sup_n |a_n^(j) - b_n^(j)| / (n + 1)` between two
/// states with the same shape.
pub fn weighted_distance(a: &MeanFieldState, b: &MeanFieldState) -> f64 {
    assert_eq!((a.classes, a.levels), (b.classes, b.levels), "state shapes differ");
    a.values
        .iter()
        .zip(&b.values)
        .enumerate()
        .map(|(i, (x, y))| (x - y).abs() / ((i % a.levels) as f64 + 1.0))
        .fold(0.0, f64::max)
}

/// Plain sup-norm distance between two tail families of the same shape.
pub fn sup_distance(a: &TailFamily, b: &TailFamily) -> f64 {
    a.classes()
        .iter()
        .zip(b.classes())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
