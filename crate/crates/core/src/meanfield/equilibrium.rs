//! Equilibrium of the mean-field dynamics.
//!
//! Three routes, all certified the same way afterwards:
//! - one class: `P_{k+1} = nu P_k^2`, i.e. `P_k = nu^(2^k - 1)`;
//! - two classes: shooting on `alpha = P_1^(1)`, with the second class's
//!   first level fixed by `gamma_1 P_1^(1)/nu_1 + gamma_2 P_1^(2)/nu_2 = 1`
//!   and deeper levels generated by the detailed-balance recursion;
//! - any number of classes: relaxing the ODE from the empty state.

use alloc::vec;
use alloc::vec::Vec;

use super::identities::{consistency_residual, recurrence_residual};
use super::ode::{drift, integrate, Horizon, IntegrateOptions, DEFAULT_MAX_TIME};
use super::MeanFieldState;
use crate::error::{Error, Result};
use crate::model::{SystemConfig, TailFamily, TailVector, DEFAULT_TRUNCATION};
use crate::stability::{asymptotic_sq2_limit, check_subset_condition};

/// Largest admissible sup-norm drift at a certified equilibrium. Also the
/// bound on the consistency identity residual.
pub const CERTIFIED_DRIFT: f64 = 1e-10;
/// Largest admissible error when the level recursion is re-evaluated.
pub const CERTIFIED_RECURRENCE: f64 = 1e-9;

/// Shooting stops when the bracket is narrower than this.
const SHOOTING_WIDTH: f64 = 1e-14;
/// Below this, shooting sequences are replaced by exact zeros.
const SHOOTING_FLOOR: f64 = 1e-13;
/// Drift target for ODE relaxation; tighter than the certification bound so
/// that the summed identities also certify.
const RELAXATION_DRIFT: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumMethod {
    /// Single class (or zero load): the doubly exponential closed form.
    ClosedForm,
    /// Two classes: bisection on the first level of the fastest class.
    ShootingM2,
    /// Integration of the mean-field ODE from the empty state.
    OdeRelaxation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub tails: TailFamily,
    pub method: EquilibriumMethod,
    /// Sup-norm drift at the returned tails.
    pub residual: f64,
    /// Shooting parameter `P_1^(1)` for the two-class route.
    pub alpha: Option<f64>,
    /// Residual of the summed consistency identity.
    pub consistency_residual: f64,
    /// Error of the re-evaluated level recursion.
    pub recurrence_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Force a route; `None` picks closed form, shooting or relaxation by
    /// class count.
    pub method: Option<EquilibriumMethod>,
    /// Last retained level `K`.
    pub truncation: usize,
    /// Time budget for ODE relaxation.
    pub max_time: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { method: None, truncation: DEFAULT_TRUNCATION, max_time: DEFAULT_MAX_TIME }
    }
}

/// Certified equilibrium with default options.
pub fn fixed_point(config: &SystemConfig) -> Result<EquilibriumResult> {
    fixed_point_with(config, &FixedPointOptions::default())
}

/// Certified equilibrium.
///
/// Fails with [`Error::UnstableRegime`] outside the asymptotic SQ(2)
/// region. A two-class shooting run that cannot be certified falls back to
/// ODE relaxation.
pub fn fixed_point_with(
    config: &SystemConfig,
    options: &FixedPointOptions,
) -> Result<EquilibriumResult> {
    if options.truncation < 2 {
        return Err(Error::InvalidArgument("truncation must be at least 2"));
    }
    if !check_subset_condition(config)? {
        let (limit, _) = asymptotic_sq2_limit(config)?;
        return Err(Error::UnstableRegime { lambda: config.arrival_rate(), limit });
    }

    let m = config.num_classes();
    let method = match options.method {
        Some(method) => method,
        None if m == 1 || config.arrival_rate() == 0.0 => EquilibriumMethod::ClosedForm,
        None if m == 2 => EquilibriumMethod::ShootingM2,
        None => EquilibriumMethod::OdeRelaxation,
    };

    match method {
        EquilibriumMethod::ClosedForm => {
            if m != 1 && config.arrival_rate() != 0.0 {
                return Err(Error::InvalidArgument("closed form needs one class or zero load"));
            }
            let tails = closed_form(config, options.truncation)?;
            certify(config, tails, method, None)
        }
        EquilibriumMethod::ShootingM2 => {
            if m != 2 {
                return Err(Error::InvalidArgument("shooting needs exactly two classes"));
            }
            match shoot(config, options.truncation) {
                Ok((tails, alpha)) => match certify(config, tails, method, Some(alpha)) {
                    Ok(result) => Ok(result),
                    Err(err) => {
                        log::warn!("shooting not certified ({err}); relaxing the ODE instead");
                        relax(config, options)
                    }
                },
                Err(err @ Error::ShootingBracketEmpty { .. }) => Err(err),
                Err(err) => {
                    log::warn!("shooting failed ({err}); relaxing the ODE instead");
                    relax(config, options)
                }
            }
        }
        EquilibriumMethod::OdeRelaxation => relax(config, options),
    }
}

fn closed_form(config: &SystemConfig, truncation: usize) -> Result<TailFamily> {
    let per_class = (0..config.num_classes())
        .map(|j| {
            let nu = config.nu(j);
            let mut values = Vec::with_capacity(truncation + 1);
            values.push(1.0);
            let mut p = 1.0f64;
            for _ in 0..truncation {
                p *= nu * p;
                values.push(p);
            }
            TailVector::new(values)
        })
        .collect::<Result<Vec<_>>>()?;
    TailFamily::new(per_class)
}

fn relax(config: &SystemConfig, options: &FixedPointOptions) -> Result<EquilibriumResult> {
    let start = MeanFieldState::empty(config.num_classes(), options.truncation);
    let trajectory = integrate(
        &start,
        config,
        IntegrateOptions {
            horizon: Horizon::UntilEquilibrium {
                max_time: options.max_time,
                tolerance: RELAXATION_DRIFT,
            },
            record_interval: None,
        },
    )?;
    let tails = trajectory.last().to_family()?;
    certify(config, tails, EquilibriumMethod::OdeRelaxation, None)
}

fn certify(
    config: &SystemConfig,
    tails: TailFamily,
    method: EquilibriumMethod,
    alpha: Option<f64>,
) -> Result<EquilibriumResult> {
    let residual = drift(&MeanFieldState::from_family(&tails), config)?.sup_norm();
    let consistency = consistency_residual(&tails, config)?;
    let recurrence = recurrence_residual(&tails, config)?;
    if residual > CERTIFIED_DRIFT
        || consistency > CERTIFIED_DRIFT
        || recurrence > CERTIFIED_RECURRENCE
    {
        return Err(Error::NoConvergence {
            time: 0.0,
            drift: residual.max(consistency).max(recurrence),
            boundary_mass: MeanFieldState::from_family(&tails).boundary_mass(),
        });
    }
    Ok(EquilibriumResult {
        tails,
        method,
        residual,
        alpha,
        consistency_residual: consistency,
        recurrence_residual: recurrence,
    })
}

/// Outcome of generating both shooting sequences for one `alpha`.
struct Shot {
    seqs: [Vec<f64>; 2],
    /// Class and level of the first entry that is negative or above its
    /// predecessor, if any.
    failure: Option<(usize, usize)>,
}

fn shoot_once(alpha: f64, gamma: [f64; 2], nu: [f64; 2], truncation: usize) -> Shot {
    let mut seqs = [vec![1.0, alpha], vec![1.0, nu[1] / gamma[1] * (1.0 - gamma[0] / nu[0] * alpha)]];
    for j in 0..2 {
        seqs[j].reserve(truncation + 1);
    }
    let mut failure = None;
    for j in 0..2 {
        let p = seqs[j][1];
        if p < 0.0 || p > 1.0 {
            failure = Some((j, 1));
            break;
        }
    }
    for l in 0..truncation.saturating_sub(1) {
        if failure.is_some() {
            break;
        }
        let mixed = gamma[0] * (seqs[0][l] + seqs[0][l + 1]) + gamma[1] * (seqs[1][l] + seqs[1][l + 1]);
        let next: [f64; 2] = core::array::from_fn(|j| {
            seqs[j][l + 1] - nu[j] * (seqs[j][l] - seqs[j][l + 1]) * mixed
        });
        // The class whose violation is larger in magnitude is blamed when
        // both fail at the same level.
        let badness = |j: usize| {
            let below = (-next[j]).max(0.0);
            let above = (next[j] - seqs[j][l + 1]).max(0.0);
            below.max(above)
        };
        let (b0, b1) = (badness(0), badness(1));
        if b0 > 0.0 || b1 > 0.0 {
            failure = Some((if b0 >= b1 { 0 } else { 1 }, l + 2));
        }
        seqs[0].push(next[0]);
        seqs[1].push(next[1]);
    }
    Shot { seqs, failure }
}

/// Depth reached before the first violation (`usize::MAX` for none).
fn depth(shot: &Shot) -> usize {
    shot.failure.map_or(usize::MAX, |(_, level)| level)
}

fn shoot(config: &SystemConfig, truncation: usize) -> Result<(TailFamily, f64)> {
    let gamma = [config.fraction(0), config.fraction(1)];
    let nu = [config.nu(0), config.nu(1)];
    let lo_end = (nu[0] / gamma[0] * (1.0 - gamma[1] / nu[1])).max(0.0);
    let hi_end = (nu[0] / gamma[0]).min(1.0);
    if !(lo_end < hi_end) {
        return Err(Error::ShootingBracketEmpty { lo: lo_end, hi: hi_end });
    }

    // The endpoints fail on opposite classes; find out which is which.
    let probe = 1e-12 * (hi_end - lo_end);
    let lo_shot = shoot_once(lo_end + probe, gamma, nu, truncation);
    let hi_shot = shoot_once(hi_end - probe, gamma, nu, truncation);
    let lo_class = match (lo_shot.failure, hi_shot.failure) {
        (Some((a, _)), Some((b, _))) if a != b => a,
        _ => {
            return Err(Error::NoConvergence {
                time: 0.0,
                drift: f64::NAN,
                boundary_mass: f64::NAN,
            })
        }
    };

    let (mut lo, mut hi) = (lo_end + probe, hi_end - probe);
    let mut best = (depth(&lo_shot), lo);
    while hi - lo > SHOOTING_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shot = shoot_once(mid, gamma, nu, truncation);
        if depth(&shot) >= best.0 {
            best = (depth(&shot), mid);
        }
        match shot.failure {
            None => break,
            Some((class, _)) if class == lo_class => lo = mid,
            Some(_) => hi = mid,
        }
    }
    for alpha in [lo, hi] {
        let d = depth(&shoot_once(alpha, gamma, nu, truncation));
        if d > best.0 {
            best = (d, alpha);
        }
    }

    let alpha = best.1;
    let Shot { mut seqs, failure } = shoot_once(alpha, gamma, nu, truncation);
    let valid_to = failure.map_or(truncation, |(_, level)| level - 1);
    // Cut where both tails drop below the floor; if rounding noise trips a
    // violation first, cut at the last valid level and let certification
    // judge the result (the omitted mass is of order P_{cut+1}).
    let cut = (1..=valid_to)
        .find(|&l| seqs[0][l] < SHOOTING_FLOOR && seqs[1][l] < SHOOTING_FLOOR)
        .unwrap_or(valid_to);
    for seq in &mut seqs {
        seq.resize(truncation + 1, 0.0);
        seq[cut + 1..].iter_mut().for_each(|x| *x = 0.0);
    }
    let [a, b] = seqs;
    let tails = TailFamily::new(vec![TailVector::new(a)?, TailVector::new(b)?])?;
    Ok((tails, alpha))
}
