use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::stats::{ReplicationResult, TailAccumulator};
use super::{sample_job_size, Scheme, SimConfig, Streams};
use crate::error::{Error, Result};

/// A resident job, finishing once the server's per-job attained service
/// reaches `tag`.
#[derive(Debug, Clone, Copy)]
struct Job {
    tag: f64,
    arrival: f64,
    measured: bool,
}

impl PartialEq for Job {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Job {}

impl PartialOrd for Job {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Job {
    // reversed so the max-heap pops the smallest tag
    fn cmp(&self, other: &Self) -> Ordering {
        other.tag.total_cmp(&self.tag).then_with(|| other.arrival.total_cmp(&self.arrival))
    }
}

/// A processor-sharing server in virtual time: `attained` is the service
/// each resident job has received since the server was last empty, so a job
/// of size `s` admitted at `attained = a` leaves when `attained = a + s`.
#[derive(Debug, Clone)]
struct Server {
    class: usize,
    capacity: f64,
    jobs: BinaryHeap<Job>,
    attained: f64,
    last_update: f64,
    version: u64,
}

impl Server {
    /// Serves every resident job at rate `C/n` up to time `t`; returns the
    /// work delivered.
    fn advance(&mut self, t: f64) -> f64 {
        let elapsed = t - self.last_update;
        self.last_update = t;
        let n = self.jobs.len();
        if n == 0 || elapsed <= 0.0 {
            return 0.0;
        }
        let served = elapsed * self.capacity;
        self.attained += served / n as f64;
        served
    }

    /// Pulls tags overtaken by rounding back to the current attained level;
    /// returns how many were moved.
    fn clamp(&mut self) -> u64 {
        let mut clamped = 0;
        while let Some(mut top) = self.jobs.peek_mut() {
            if top.tag >= self.attained {
                break;
            }
            top.tag = self.attained;
            clamped += 1;
        }
        clamped
    }

    fn admit(&mut self, size: f64, arrival: f64, measured: bool) {
        if self.jobs.is_empty() {
            self.attained = 0.0;
        }
        self.jobs.push(Job { tag: self.attained + size, arrival, measured });
    }

    fn next_departure(&self) -> Option<f64> {
        let least = (self.jobs.peek()?.tag - self.attained).max(0.0);
        Some(self.last_update + least * self.jobs.len() as f64 / self.capacity)
    }

    fn remaining_work(&self) -> f64 {
        self.jobs.iter().map(|j| (j.tag - self.attained).max(0.0)).sum()
    }
}

/// A pending departure; stale once the server's version has moved on.
#[derive(Debug, Clone, Copy)]
struct Departure {
    time: f64,
    server: usize,
    version: u64,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Departure {}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Departure {
    // reversed so the max-heap pops the earliest departure
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.server.cmp(&self.server))
    }
}

struct Router {
    scheme: Scheme,
    /// Cumulative class probabilities (static and hybrid).
    cumulative: Vec<f64>,
    block_start: Vec<usize>,
    block_len: Vec<usize>,
    /// Server indices reshuffled in place by partial Fisher-Yates; for
    /// hybrid routing each class block is permuted within itself.
    perm: Vec<usize>,
}

impl Router {
    fn new(scheme: &Scheme, sizes: &[usize]) -> Self {
        let mut block_start = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            block_start.push(acc);
            acc += s;
        }
        let cumulative = match scheme {
            Scheme::Static { probabilities } | Scheme::Hybrid { probabilities } => probabilities
                .iter()
                .scan(0.0, |s, &p| {
                    *s += p;
                    Some(*s)
                })
                .collect(),
            Scheme::SqD { .. } => Vec::new(),
        };
        Self {
            scheme: scheme.clone(),
            cumulative,
            block_start,
            block_len: sizes.to_vec(),
            perm: (0..acc).collect(),
        }
    }

    fn pick_class(&self, rng: &mut Xoshiro256PlusPlus) -> usize {
        let u: f64 = rng.random();
        let p = match &self.scheme {
            Scheme::Static { probabilities } | Scheme::Hybrid { probabilities } => probabilities,
            Scheme::SqD { .. } => unreachable!("SQ(d) does not pick classes"),
        };
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1))
    }

    /// Least occupied of `d` distinct servers drawn from `perm[lo..hi]`,
    /// ties broken uniformly.
    fn best_of(
        &mut self,
        lo: usize,
        hi: usize,
        d: usize,
        servers: &[Server],
        rng: &mut Xoshiro256PlusPlus,
    ) -> usize {
        let mut best = usize::MAX;
        let mut best_len = usize::MAX;
        let mut ties = 0u32;
        for i in lo..lo + d {
            let r = rng.random_range(i..hi);
            self.perm.swap(i, r);
            let cand = self.perm[i];
            let len = servers[cand].jobs.len();
            if len < best_len {
                best = cand;
                best_len = len;
                ties = 1;
            } else if len == best_len {
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = cand;
                }
            }
        }
        best
    }

    fn route(&mut self, servers: &[Server], rng: &mut Xoshiro256PlusPlus) -> usize {
        match self.scheme {
            Scheme::SqD { d } => {
                let n = self.perm.len();
                self.best_of(0, n, d, servers, rng)
            }
            Scheme::Static { .. } => {
                let j = self.pick_class(rng);
                self.block_start[j] + rng.random_range(0..self.block_len[j])
            }
            Scheme::Hybrid { .. } => {
                let j = self.pick_class(rng);
                let lo = self.block_start[j];
                self.best_of(lo, lo + self.block_len[j], 2, servers, rng)
            }
        }
    }
}

/// Simulates replication `replication` of `config`.
///
/// Jobs `warmup..horizon` (in arrival order) are measured. Arrivals keep
/// coming after the horizon until every measured job has left, so the
/// measured jobs see a stationary background load.
pub fn run_replication(config: &SimConfig, replication: u32) -> Result<ReplicationResult> {
    let sizes = config.validate()?;
    let system = &config.system;
    let lambda = system.arrival_rate();
    if !(lambda > 0.0) {
        return Err(Error::SimConfig("simulation needs a positive arrival rate"));
    }
    if config.horizon <= config.warmup {
        return Err(Error::NoSamples);
    }
    let n = config.n_servers;
    let mu = system.mu();
    let total_rate = n as f64 * lambda;

    let mut servers: Vec<Server> = Vec::with_capacity(n);
    for (j, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            servers.push(Server {
                class: j,
                capacity: system.capacity(j),
                jobs: BinaryHeap::new(),
                attained: 0.0,
                last_update: 0.0,
                version: 0,
            });
        }
    }
    let mut router = Router::new(&config.scheme, &sizes);
    let mut streams = Streams::new(config.seed, replication);
    let mut heap: BinaryHeap<Departure> = BinaryHeap::with_capacity(2 * n);
    let mut tails = TailAccumulator::new(system.num_classes(), config.truncation);

    let mut join_counts = vec![0u64; system.num_classes()];
    let (mut events, mut zero_size_jobs, mut clamped_jobs) = (0u64, 0u64, 0u64);
    let (mut work_arrived, mut work_served) = (0.0f64, 0.0f64);
    let mut sojourn_sum = 0.0f64;
    let mut outstanding = 0u64;
    let mut arrivals = 0u64;

    // occupancy integral over the measurement window
    let mut in_system = 0u64;
    let (mut area, mut area_clock) = (0.0f64, 0.0f64);
    let (mut window_open, mut window_start, mut window_end) = (false, 0.0f64, 0.0f64);

    let inter_arrival = |rng: &mut Xoshiro256PlusPlus| -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / total_rate
    };
    let mut next_arrival = inter_arrival(&mut streams.arrivals);
    let mut now;

    loop {
        while heap.peek().is_some_and(|d| servers[d.server].version != d.version) {
            heap.pop();
        }
        let departure = heap.peek().copied();
        let arrival_first = departure.is_none_or(|d| next_arrival <= d.time);
        if arrival_first && arrivals > config.horizon && outstanding == 0 {
            break;
        }
        now = if arrival_first { next_arrival } else { departure.map_or(0.0, |d| d.time) };
        if window_open {
            area += in_system as f64 * (now - area_clock);
        }
        area_clock = now;
        events += 1;

        let touched = if arrival_first {
            let index = arrivals;
            arrivals += 1;
            if index == config.warmup {
                window_open = true;
                window_start = now;
            }
            if index == config.horizon {
                window_open = false;
                window_end = now;
            }
            let measured = index >= config.warmup && index < config.horizon;
            if measured {
                tails.sample();
            }
            next_arrival = now + inter_arrival(&mut streams.arrivals);

            let size = sample_job_size(config.job_size, mu, &mut streams.sizes);
            let target = router.route(&servers, &mut streams.routing);
            let server = &mut servers[target];
            if measured {
                join_counts[server.class] += 1;
            }
            work_arrived += size;
            if size <= 0.0 {
                zero_size_jobs += 1;
                continue;
            }
            work_served += server.advance(now);
            clamped_jobs += server.clamp();
            tails.grow(server.class, server.jobs.len());
            server.admit(size, now, measured);
            in_system += 1;
            if measured {
                outstanding += 1;
            }
            target
        } else {
            let d = departure.expect("departure chosen");
            heap.pop();
            let server = &mut servers[d.server];
            work_served += server.advance(now);
            tails.shrink(server.class, server.jobs.len());
            let job = server.jobs.pop().expect("a scheduled departure has a resident job");
            clamped_jobs += server.clamp();
            in_system -= 1;
            if job.measured {
                sojourn_sum += now - job.arrival;
                outstanding -= 1;
            }
            d.server
        };

        let server = &mut servers[touched];
        server.version += 1;
        if let Some(time) = server.next_departure() {
            heap.push(Departure { time, server: touched, version: server.version });
        }
    }

    let end = area_clock;
    let mut work_remaining = 0.0;
    for server in &mut servers {
        work_served += server.advance(end);
        work_remaining += server.remaining_work();
    }

    let measured_jobs = config.horizon - config.warmup;
    let window = window_end - window_start;
    let per_server_window = n as f64 * window;
    Ok(ReplicationResult {
        replication,
        measured_jobs,
        mean_sojourn: sojourn_sum / measured_jobs as f64,
        mean_occupancy: area / per_server_window,
        arrival_rate: measured_jobs as f64 / per_server_window,
        tails: tails.finish(&sizes),
        join_counts,
        events,
        zero_size_jobs,
        clamped_jobs,
        work_arrived,
        work_served,
        work_remaining,
    })
}
