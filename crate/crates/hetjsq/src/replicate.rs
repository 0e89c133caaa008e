//! Independent replications run in parallel and their aggregate.

use hetjsq_core::sim::{run_replication, ReplicationResult, SimConfig};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Result;

/// Aggregate of all replications of one [`SimConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub replications: Vec<ReplicationResult>,
    /// Mean over replications of the per-replication mean sojourn.
    pub mean_sojourn: f64,
    /// Half-width of the 95% Student-t interval; NaN with one replication.
    pub ci_half_width: f64,
    /// Per-class tails averaged over replications.
    pub tails: Vec<Vec<f64>>,
    /// Per-class share of measured jobs, pooled over replications.
    pub join_frequencies: Vec<f64>,
    pub events: u64,
    pub zero_size_jobs: u64,
    pub clamped_jobs: u64,
}

impl SimResult {
    /// True when `[mean - ci, mean + ci]` of the two results do not overlap.
    pub fn separated_from(&self, other: &SimResult) -> bool {
        (self.mean_sojourn - other.mean_sojourn).abs() > self.ci_half_width + other.ci_half_width
    }
}

/// Mean and 95% half-width of `samples` (Student t with `n - 1` dof).
pub fn mean_and_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Runs every replication of `config` on the rayon pool.
///
/// Each replication draws from its own generator, so the result does not
/// depend on the number of threads.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let replications: Vec<ReplicationResult> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect::<std::result::Result<_, _>>()?;
    Ok(aggregate(replications))
}

pub fn aggregate(replications: Vec<ReplicationResult>) -> SimResult {
    let sojourns: Vec<f64> = replications.iter().map(|r| r.mean_sojourn).collect();
    let (mean_sojourn, ci_half_width) = mean_and_ci(&sojourns);

    let count = replications.len() as f64;
    let first = &replications[0];
    let mut tails = vec![vec![0.0; first.tails[0].len()]; first.tails.len()];
    let mut joins = vec![0u64; first.join_counts.len()];
    for r in &replications {
        for (acc, row) in tails.iter_mut().zip(&r.tails) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x / count;
            }
        }
        for (a, c) in joins.iter_mut().zip(&r.join_counts) {
            *a += c;
        }
    }
    let measured: u64 = replications.iter().map(|r| r.measured_jobs).sum();
    let join_frequencies = joins.iter().map(|&c| c as f64 / measured.max(1) as f64).collect();

    SimResult {
        mean_sojourn,
        ci_half_width,
        tails,
        join_frequencies,
        events: replications.iter().map(|r| r.events).sum(),
        zero_size_jobs: replications.iter().map(|r| r.zero_size_jobs).sum(),
        clamped_jobs: replications.iter().map(|r| r.clamped_jobs).sum(),
        replications,
    }
}
