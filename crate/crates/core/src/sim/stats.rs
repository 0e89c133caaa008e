use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{TailFamily, TailVector};

/// Sums, over sampled arrival epochs, of the number of class-`j` servers
/// holding at least `k` jobs.
///
/// Updates are lazy: a counter only folds its value into the sum when it
/// changes, weighted by the number of samples taken since its last change.
#[derive(Debug, Clone)]
pub(crate) struct TailAccumulator {
    levels: usize,
    count: Vec<u64>,
    since: Vec<u64>,
    sum: Vec<u128>,
    samples: u64,
}

impl TailAccumulator {
    pub fn new(classes: usize, levels: usize) -> Self {
        let len = classes * (levels + 1);
        Self {
            levels,
            count: vec![0; len],
            since: vec![0; len],
            sum: vec![0; len],
            samples: 0,
        }
    }

    /// Records one sample of the current occupancy profile.
    pub fn sample(&mut self) {
        self.samples += 1;
    }

    fn fold(&mut self, idx: usize) {
        self.sum[idx] += self.count[idx] as u128 * (self.samples - self.since[idx]) as u128;
        self.since[idx] = self.samples;
    }

    /// A class-`class` server went from `n` to `n + 1` jobs.
    pub fn grow(&mut self, class: usize, n: usize) {
        if n < self.levels {
            let idx = class * (self.levels + 1) + n + 1;
            self.fold(idx);
            self.count[idx] += 1;
        }
    }

    /// A class-`class` server went from `n` to `n - 1` jobs.
    pub fn shrink(&mut self, class: usize, n: usize) {
        if n <= self.levels {
            let idx = class * (self.levels + 1) + n;
            self.fold(idx);
            self.count[idx] -= 1;
        }
    }

    /// Tail estimates `x_k^(j)` for `k = 0..=levels`.
    pub fn finish(mut self, class_sizes: &[usize]) -> Vec<Vec<f64>> {
        for idx in 0..self.count.len() {
            self.fold(idx);
        }
        let stride = self.levels + 1;
        class_sizes
            .iter()
            .enumerate()
            .map(|(j, &size)| {
                let denom = self.samples as f64 * size as f64;
                let mut row: Vec<f64> = (0..stride)
                    .map(|k| {
                        if k == 0 {
                            1.0
                        } else if self.samples == 0 {
                            0.0
                        } else {
                            self.sum[j * stride + k] as f64 / denom
                        }
                    })
                    .collect();
                row[0] = 1.0;
                row
            })
            .collect()
    }
}

/// Statistics of a single replication. Only jobs arriving after the
/// warmup and within the horizon are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: u32,
    /// Number of measured jobs.
    pub measured_jobs: u64,
    /// Mean sojourn time of the measured jobs.
    pub mean_sojourn: f64,
    /// Time-average occupancy per server over the measurement window.
    pub mean_occupancy: f64,
    /// Measured arrivals per server per unit time over the window.
    pub arrival_rate: f64,
    /// Per-class tails `x_k^(j)`, `k = 0..=truncation`, seen by measured
    /// arrivals.
    pub tails: Vec<Vec<f64>>,
    /// Measured jobs routed to each class.
    pub join_counts: Vec<u64>,
    /// Arrivals plus departures processed.
    pub events: u64,
    /// Jobs of zero size, which leave on arrival.
    pub zero_size_jobs: u64,
    /// Resident jobs whose remaining work went negative through rounding
    /// and was reset to zero.
    pub clamped_jobs: u64,
    /// Work brought by every job that arrived.
    pub work_arrived: f64,
    /// Capacity times busy time, summed over servers.
    pub work_served: f64,
    /// Work still in the system when the replication stopped.
    pub work_remaining: f64,
}

impl ReplicationResult {
    /// `mean_occupancy / arrival_rate`, the sojourn time implied by
    /// Little's law.
    pub fn little_sojourn(&self) -> f64 {
        self.mean_occupancy / self.arrival_rate
    }

    /// Relative gap between work that left and service delivered.
    pub fn work_conservation_gap(&self) -> f64 {
        let left = self.work_arrived - self.work_remaining;
        (left - self.work_served).abs() / self.work_arrived.max(f64::MIN_POSITIVE)
    }

    /// Fraction of measured jobs routed to each class.
    pub fn join_frequencies(&self) -> Vec<f64> {
        let total = self.measured_jobs.max(1) as f64;
        self.join_counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// The empirical tails as a [`TailFamily`] (no tail-size requirement at
    /// the last level).
    pub fn empirical_tails(&self) -> Result<TailFamily> {
        if self.measured_jobs == 0 {
            return Err(Error::NoSamples);
        }
        let per_class = self
            .tails
            .iter()
            .map(|row| TailVector::with_tolerance(row.clone(), 1.0))
            .collect::<Result<Vec<_>>>()?;
        TailFamily::new(per_class)
    }
}
