use alloc::vec;
use alloc::vec::Vec;

use super::MeanFieldState;
use crate::error::{Error, Result};
use crate::model::{SystemConfig, DEFAULT_TAIL_TOLERANCE};

/// Default sup-norm drift at which integration is considered at equilibrium.
pub const DEFAULT_EQUILIBRIUM_DRIFT: f64 = 1e-11;
/// Default time budget for equilibrium runs.
pub const DEFAULT_MAX_TIME: f64 = 1e6;

/// Allowed excursion outside `[0, 1]` or against monotonicity before a step
/// is rejected and retried with half the step size.
const STEP_VIOLATION_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-12;

/// Time derivative of every tail coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    values: Vec<f64>,
    levels: usize,
}

impl Drift {
    pub fn get(&self, j: usize, n: usize) -> f64 {
        self.values[j * self.levels + n]
    }

    pub fn class(&self, j: usize) -> &[f64] {
        &self.values[j * self.levels..(j + 1) * self.levels]
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.values)
    }

    /// `sup_j sup_n |h_n^(j)| / (n + 1)`.
    pub fn weighted_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, h)| h.abs() / ((i % self.levels) as f64 + 1.0))
            .fold(0.0, f64::max)
    }
}

/// Mean-field drift `h(u)`.
///
/// For `n >= 1`:
/// `h_n^(j) = lambda (u_{n-1}^(j) - u_n^(j)) sum_i gamma_i (u_{n-1}^(i) + u_n^(i))
///            - mu C_j (u_n^(j) - u_{n+1}^(j))`, and `h_0^(j) = 0`.
pub fn drift(state: &MeanFieldState, config: &SystemConfig) -> Result<Drift> {
    let rates = Rates::new(config, state.num_classes())?;
    let mut values = vec![0.0; state.raw().len()];
    let mut scratch = vec![0.0; state.truncation() + 1];
    rates.eval(state.raw(), state.truncation() + 1, &mut scratch, &mut values);
    Ok(Drift { values, levels: state.truncation() + 1 })
}

/// When to stop integrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Integrate exactly up to this time.
    Fixed(f64),
    /// Integrate until the sup-norm drift falls below `tolerance`, failing
    /// with [`Error::NoConvergence`] if `max_time` passes first.
    UntilEquilibrium { max_time: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub horizon: Horizon,
    /// Record a state roughly every this many time units (first step at or
    /// after each multiple). `None` keeps only the initial and final states.
    pub record_interval: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            horizon: Horizon::UntilEquilibrium {
                max_time: DEFAULT_MAX_TIME,
                tolerance: DEFAULT_EQUILIBRIUM_DRIFT,
            },
            record_interval: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Recorded states; the first is the initial state and the last the final one.
    pub states: Vec<MeanFieldState>,
    /// Total absolute correction applied by post-step projection onto the
    /// monotone cone.
    pub clamp_mass: f64,
    /// Accepted RK4 steps.
    pub steps: usize,
    /// Sup-norm drift at the final state.
    pub final_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &MeanFieldState {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Integrates `du/dt = h(u)` with classical RK4.
///
/// Steps start at `1 / K_2`, where `K_2 = 8 lambda + 2 mu max_j C_j` bounds
/// the Lipschitz constant of the drift, and are halved whenever a step
/// would leave `[0, 1]` or break monotonicity by more than `1e-9`. Accepted
/// steps are projected back onto the monotone cone.
///
/// In equilibrium mode, a state whose last retained level carries more than
/// the default tail tolerance is not accepted as an equilibrium: the mass has
/// piled up against the truncation (what happens outside the stability
/// region), and [`Error::NoConvergence`] is returned.
pub fn integrate(
    initial: &MeanFieldState,
    config: &SystemConfig,
    options: IntegrateOptions,
) -> Result<Trajectory> {
    let classes = initial.num_classes();
    let levels = initial.truncation() + 1;
    let rates = Rates::new(config, classes)?;

    let lipschitz = 8.0 * config.arrival_rate()
        + 2.0 * config.mu() * config.classes().iter().map(|c| c.capacity).fold(0.0, f64::max);
    let max_step = 2.0 / lipschitz;
    let mut step = 1.0 / lipschitz;

    let (end_time, tolerance) = match options.horizon {
        Horizon::Fixed(t) => (t, None),
        Horizon::UntilEquilibrium { max_time, tolerance } => (max_time, Some(tolerance)),
    };
    if !(end_time.is_finite() && end_time >= initial.time()) {
        return Err(Error::InvalidArgument("horizon must be a finite time after the start"));
    }

    let n = initial.raw().len();
    let mut u = initial.raw().to_vec();
    let mut t = initial.time();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; levels];

    let mut states = vec![initial.clone()];
    let mut next_record = options.record_interval.map(|dt| t + dt);
    let mut clamp_mass = 0.0;
    let mut steps = 0;

    rates.eval(&u, levels, &mut scratch, &mut k1);
    loop {
        let current = sup_abs(&k1);
        if let Some(tol) = tolerance {
            if current < tol {
                let last = MeanFieldState::from_raw(u, classes, levels, t);
                let boundary_mass = last.boundary_mass();
                if boundary_mass > DEFAULT_TAIL_TOLERANCE {
                    return Err(Error::NoConvergence { time: t, drift: current, boundary_mass });
                }
                states.push(last);
                return Ok(Trajectory { states, clamp_mass, steps, final_drift: current });
            }
        }
        if t >= end_time {
            let last = MeanFieldState::from_raw(u, classes, levels, t);
            if tolerance.is_some() {
                return Err(Error::NoConvergence {
                    time: t,
                    drift: current,
                    boundary_mass: last.boundary_mass(),
                });
            }
            states.push(last);
            return Ok(Trajectory { states, clamp_mass, steps, final_drift: current });
        }

        let dt = step.min(end_time - t);
        let rk4_ok = {
            for i in 0..n {
                stage[i] = u[i] + 0.5 * dt * k1[i];
            }
            rates.eval(&stage, levels, &mut scratch, &mut k2);
            for i in 0..n {
                stage[i] = u[i] + 0.5 * dt * k2[i];
            }
            rates.eval(&stage, levels, &mut scratch, &mut k3);
            for i in 0..n {
                stage[i] = u[i] + dt * k3[i];
            }
            rates.eval(&stage, levels, &mut scratch, &mut k4);
            for i in 0..n {
                next[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            within_cone(&next, levels, STEP_VIOLATION_TOL)
        };
        if !rk4_ok && dt > MIN_STEP {
            step = dt * 0.5;
            continue;
        }

        clamp_mass += project_to_cone(&mut next, levels);
        core::mem::swap(&mut u, &mut next);
        t += dt;
        steps += 1;
        step = (step * 2.0).min(max_step);
        rates.eval(&u, levels, &mut scratch, &mut k1);

        if let (Some(at), Some(every)) = (next_record, options.record_interval) {
            if t >= at && t < end_time {
                states.push(MeanFieldState::from_raw(u.clone(), classes, levels, t));
                next_record = Some(at + every * libm::floor((t - at) / every + 1.0));
            }
        }
    }
}

/// Per-class constants of the drift.
pub(super) struct Rates {
    lambda: f64,
    fractions: Vec<f64>,
    service: Vec<f64>,
}

impl Rates {
    pub(super) fn new(config: &SystemConfig, classes: usize) -> Result<Self> {
        if classes != config.num_classes() {
            return Err(Error::InvalidArgument("state and config have different class counts"));
        }
        Ok(Self {
            lambda: config.arrival_rate(),
            fractions: config.classes().iter().map(|c| c.fraction).collect(),
            service: config.classes().iter().map(|c| config.mu() * c.capacity).collect(),
        })
    }

    /// Writes `h(u)` into `out`. `weighted` receives `sum_i gamma_i u_n^(i)`.
    pub(super) fn eval(&self, u: &[f64], levels: usize, weighted: &mut [f64], out: &mut [f64]) {
        weighted.iter_mut().for_each(|w| *w = 0.0);
        for (j, gamma) in self.fractions.iter().enumerate() {
            for (w, x) in weighted.iter_mut().zip(&u[j * levels..(j + 1) * levels]) {
                *w += gamma * x;
            }
        }
        for (j, service) in self.service.iter().enumerate() {
            let row = &u[j * levels..(j + 1) * levels];
            let h = &mut out[j * levels..(j + 1) * levels];
            h[0] = 0.0;
            for n in 1..levels {
                let above = if n + 1 < levels { row[n + 1] } else { 0.0 };
                h[n] = self.lambda * (row[n - 1] - row[n]) * (weighted[n - 1] + weighted[n])
                    - service * (row[n] - above);
            }
        }
    }
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn within_cone(u: &[f64], levels: usize, tol: f64) -> bool {
    u.chunks(levels).all(|row| {
        row.iter().all(|&x| x.is_finite() && x >= -tol && x <= 1.0 + tol)
            && row.windows(2).all(|w| w[1] <= w[0] + tol)
    })
}

/// Projects each row onto `1 = u_0 >= u_1 >= ... >= 0`, returning the total
/// absolute change.
fn project_to_cone(u: &mut [f64], levels: usize) -> f64 {
    let mut moved = 0.0;
    for row in u.chunks_mut(levels) {
        moved += (row[0] - 1.0).abs();
        row[0] = 1.0;
        let mut ceiling = 1.0;
        for x in row.iter_mut().skip(1) {
            let clamped = x.clamp(0.0, ceiling);
            moved += (clamped - *x).abs();
            *x = clamped;
            ceiling = clamped;
        }
    }
    moved
}
