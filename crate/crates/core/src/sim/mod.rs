//! Exact event-driven simulation of `N` heterogeneous processor-sharing
//! servers under static, SQ(d) and hybrid routing.
//!
//! A single replication is deterministic given the seed and replication
//! index; aggregation across replications is left to the caller.

mod engine;
mod stats;

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::model::{SystemConfig, DEFAULT_TRUNCATION};
use crate::stability::class_sizes;

pub use engine::run_replication;
pub use stats::ReplicationResult;

/// Default number of jobs per replication.
pub const DEFAULT_HORIZON: u64 = 2_000_000;
/// Default number of replications.
pub const DEFAULT_REPLICATIONS: u32 = 10;
/// Default warmup as a fraction of the horizon.
pub const DEFAULT_WARMUP_SHARE: f64 = 0.2;

const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Dispatching rule applied to every arrival.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// Pick a class with probability `p_j`, then a uniform server in it.
    Static { probabilities: Vec<f64> },
    /// Sample `d` distinct servers uniformly and join the least occupied;
    /// ties are broken uniformly.
    SqD { d: usize },
    /// Pick a class with probability `p_j`, then join the less occupied of
    /// two distinct servers of that class (fair coin on ties).
    Hybrid { probabilities: Vec<f64> },
}

impl Scheme {
    /// SQ(2) over the whole farm.
    pub const fn sq2() -> Self {
        Scheme::SqD { d: 2 }
    }
}

/// Job-size law. All built-in laws have mean `1/mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobSize {
    Exponential,
    /// Every job brings exactly `1/mu` units of work.
    Deterministic,
    /// Pareto tail `F(x) = 1 - 1/(4x^2)` on `x >= 1/2`, scaled by `1/mu`.
    PowerLaw,
    /// Every job brings exactly this much work (may be zero).
    Fixed(f64),
}

/// Draws one job size.
pub fn sample_job_size<R: Rng + ?Sized>(dist: JobSize, mu: f64, rng: &mut R) -> f64 {
    match dist {
        JobSize::Exponential => {
            let e: f64 = Exp1.sample(rng);
            e / mu
        }
        JobSize::Deterministic => 1.0 / mu,
        JobSize::PowerLaw => power_law_quantile(rng.random::<f64>()) / mu,
        JobSize::Fixed(w) => w,
    }
}

/// Inverse CDF of the unit-mean power law: `1 / (2 sqrt(1 - u))`.
pub fn power_law_quantile(u: f64) -> f64 {
    0.5 / libm::sqrt(1.0 - u)
}

/// One simulation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub system: SystemConfig,
    pub n_servers: usize,
    pub scheme: Scheme,
    pub job_size: JobSize,
    /// Total number of jobs per replication, warmup included.
    pub horizon: u64,
    /// Leading jobs excluded from the statistics.
    pub warmup: u64,
    pub replications: u32,
    pub seed: u64,
    /// Highest occupancy level tracked by the empirical tails.
    pub truncation: usize,
}

impl SimConfig {
    /// A configuration with default horizon, warmup, replications and seed 0.
    pub fn new(system: SystemConfig, n_servers: usize, scheme: Scheme, job_size: JobSize) -> Self {
        Self {
            system,
            n_servers,
            scheme,
            job_size,
            horizon: DEFAULT_HORIZON,
            warmup: warmup_for(DEFAULT_HORIZON),
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    /// Sets the horizon and resets the warmup to its default share.
    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self.warmup = warmup_for(horizon);
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_replications(mut self, replications: u32) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks the invariants and returns the number of servers per class.
    pub fn validate(&self) -> Result<Vec<usize>> {
        let sizes = class_sizes(&self.system, self.n_servers)
            .map_err(|_| Error::SimConfig("N * fraction must be a positive integer for every class"))?;
        if self.warmup > self.horizon {
            return Err(Error::SimConfig("warmup exceeds horizon"));
        }
        if self.replications == 0 {
            return Err(Error::SimConfig("at least one replication is required"));
        }
        if self.truncation == 0 {
            return Err(Error::SimConfig("truncation must be positive"));
        }
        if let JobSize::Fixed(w) = self.job_size {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::SimConfig("fixed job size must be finite and nonnegative"));
            }
        }
        match &self.scheme {
            Scheme::SqD { d } => {
                if *d == 0 {
                    return Err(Error::SimConfig("SQ(d) needs d >= 1"));
                }
                if *d > self.n_servers {
                    return Err(Error::SimConfig("SQ(d) needs d <= N"));
                }
            }
            Scheme::Static { probabilities } => self.check_probabilities(probabilities)?,
            Scheme::Hybrid { probabilities } => {
                self.check_probabilities(probabilities)?;
                if probabilities.iter().zip(&sizes).any(|(&p, &n)| p > 0.0 && n < 2) {
                    return Err(Error::SimConfig(
                        "hybrid routing needs two servers in every class it uses",
                    ));
                }
            }
        }
        Ok(sizes)
    }

    fn check_probabilities(&self, probabilities: &[f64]) -> Result<()> {
        if probabilities.len() != self.system.num_classes() {
            return Err(Error::SimConfig("one routing probability per class is required"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::SimConfig("routing probabilities must be nonnegative"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::SimConfig("routing probabilities must sum to one"));
        }
        Ok(())
    }
}

fn warmup_for(horizon: u64) -> u64 {
    (horizon as f64 * DEFAULT_WARMUP_SHARE) as u64
}

/// Independent generators for one replication: arrivals, job sizes and
/// routing. Replications are separated by `long_jump`, streams by `jump`,
/// so schemes compared at one seed share arrival and size sequences.
pub(crate) struct Streams {
    pub arrivals: Xoshiro256PlusPlus,
    pub sizes: Xoshiro256PlusPlus,
    pub routing: Xoshiro256PlusPlus,
}

impl Streams {
    pub fn new(seed: u64, replication: u32) -> Self {
        let mut base = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..replication {
            base.long_jump();
        }
        let arrivals = base.clone();
        base.jump();
        let sizes = base.clone();
        base.jump();
        Self { arrivals, sizes, routing: base }
    }
}
