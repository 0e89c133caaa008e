//! Subcommand bodies. Each writes CSV to `out`; human-readable notes go
//! to the log.

use std::io::Write;

use hetjsq_core::hybrid::{hybrid_mean_sojourn, proportional_bias, solve_hybrid};
use hetjsq_core::meanfield::{
    class_join_probabilities, fixed_point_with, mean_sojourn_from_tails, EquilibriumMethod,
    FixedPointOptions,
};
use hetjsq_core::sim::{JobSize, SimConfig};
use hetjsq_core::stability;
use hetjsq_core::static_routing::solve_static;
use hetjsq_core::SystemConfig;

use crate::error::{CliError, Result};
use crate::experiments::{job_size_name, sim_scheme, SchemeKind};
use crate::replicate::{self, SimResult};

fn header<W: Write>(out: &mut W, kind: &str) -> Result<()> {
    writeln!(out, "# hetjsq {kind} schema=1")?;
    Ok(())
}

fn indexed(prefix: &str, m: usize) -> impl Iterator<Item = String> + '_ {
    (1..=m).map(move |j| format!("{prefix}_{j}"))
}

fn fmt_all(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|x| x.to_string())
}

/// Static, asymptotic SQ(2) and (optionally) finite-N SQ(2) limits.
pub fn stability<W: Write>(system: &SystemConfig, n: Option<usize>, mut out: W) -> Result<()> {
    let report = stability::report(system, n)?;
    let subset: Vec<String> = report.binding_subset.iter().map(|j| (j + 1).to_string()).collect();
    let lambda = system.arrival_rate();
    log::info!(
        "static limit {:.6}, asymptotic SQ(2) limit {:.6} (binding classes {}){}",
        report.static_limit,
        report.asymptotic_sq2_limit,
        subset.join(","),
        report.finite_n_limit.map(|l| format!(", N={} limit {l:.6}", n.unwrap_or(0))).unwrap_or_default()
    );
    header(&mut out, "stability")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda",
        "static_limit",
        "asymptotic_sq2_limit",
        "finite_n",
        "finite_n_limit",
        "binding_subset",
        "static_stable",
        "sq2_stable",
    ])?;
    w.write_record([
        lambda.to_string(),
        report.static_limit.to_string(),
        report.asymptotic_sq2_limit.to_string(),
        n.map(|n| n.to_string()).unwrap_or_default(),
        report.finite_n_limit.map(|l| l.to_string()).unwrap_or_default(),
        subset.join(";"),
        (lambda < report.static_limit).to_string(),
        (lambda < report.finite_n_limit.unwrap_or(report.asymptotic_sq2_limit)).to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn static_opt<W: Write>(system: &SystemConfig, mut out: W) -> Result<()> {
    let sol = solve_static(system)?;
    let m = system.num_classes();
    header(&mut out, "static-opt")?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["j_star".to_string()];
    head.extend(indexed("rho", m).chain(indexed("p", m)));
    head.push("mean_sojourn".into());
    w.write_record(&head)?;
    let mut row = vec![sol.active_set_size.to_string()];
    row.extend(fmt_all(&sol.loads).chain(fmt_all(&sol.probabilities)));
    row.push(sol.mean_sojourn.to_string());
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Which bias `hybrid-opt` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bias {
    Optimal,
    Proportional,
}

pub fn hybrid_opt<W: Write>(system: &SystemConfig, bias: Bias, mut out: W) -> Result<()> {
    let m = system.num_classes();
    let (active, theta, loads, probabilities, sojourn) = match bias {
        Bias::Optimal => {
            let s = solve_hybrid(system)?;
            (s.active_set_size, s.theta_star, s.loads, s.probabilities, s.mean_sojourn)
        }
        Bias::Proportional => {
            let limit = stability::static_limit(system);
            let lambda = system.arrival_rate();
            if lambda >= limit {
                return Err(hetjsq_core::Error::Unstable { lambda, limit }.into());
            }
            if lambda <= 0.0 {
                return Err(hetjsq_core::Error::InvalidArrivalRate(lambda).into());
            }
            let p = proportional_bias(system);
            let rho = lambda / limit;
            let loads = vec![rho; m];
            (m, f64::NAN, loads.clone(), p, hybrid_mean_sojourn(system, &loads))
        }
    };
    header(&mut out, "hybrid-opt")?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["j_star".to_string(), "theta_star".into()];
    head.extend(indexed("rho", m).chain(indexed("p", m)));
    head.push("mean_sojourn".into());
    w.write_record(&head)?;
    let mut row = vec![active.to_string(), if theta.is_nan() { String::new() } else { theta.to_string() }];
    row.extend(fmt_all(&loads).chain(fmt_all(&probabilities)));
    row.push(sojourn.to_string());
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Equilibrium route forced from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Shooting,
    Ode,
}

fn method_name(method: EquilibriumMethod) -> &'static str {
    match method {
        EquilibriumMethod::ClosedForm => "closed_form",
        EquilibriumMethod::ShootingM2 => "shooting_m2",
        EquilibriumMethod::OdeRelaxation => "ode_relaxation",
    }
}

/// Tails table followed, after a blank line, by a one-row summary table.
pub fn meanfield<W: Write>(
    system: &SystemConfig,
    method: MethodChoice,
    levels: usize,
    mut out: W,
) -> Result<()> {
    let options = FixedPointOptions {
        method: match method {
            MethodChoice::Auto => None,
            MethodChoice::Shooting => Some(EquilibriumMethod::ShootingM2),
            MethodChoice::Ode => Some(EquilibriumMethod::OdeRelaxation),
        },
        truncation: levels,
        ..FixedPointOptions::default()
    };
    let eq = fixed_point_with(system, &options)?;
    let sojourn = mean_sojourn_from_tails(&eq.tails, system)?;
    let joins = class_join_probabilities(&eq.tails, system);
    let m = system.num_classes();

    header(&mut out, "meanfield")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut head = vec!["k".to_string()];
        head.extend(indexed("P", m));
        w.write_record(&head)?;
        for k in 0..=eq.tails.truncation() {
            let mut row = vec![k.to_string()];
            row.extend((0..m).map(|j| eq.tails.get(j, k).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    writeln!(out)?;
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = ["method", "alpha", "mean_sojourn", "drift_residual", "consistency_residual", "recurrence_residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    head.extend(indexed("join", m));
    w.write_record(&head)?;
    let mut row = vec![
        method_name(eq.method).to_string(),
        eq.alpha.map(|a| a.to_string()).unwrap_or_default(),
        sojourn.to_string(),
        eq.residual.to_string(),
        eq.consistency_residual.to_string(),
        eq.recurrence_residual.to_string(),
    ];
    row.extend(fmt_all(&joins));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub scheme: SchemeKind,
    pub servers: usize,
    pub jobs: u64,
    pub warmup: Option<u64>,
    pub replications: u32,
    pub seed: u64,
    pub job_size: JobSize,
}

pub fn simulate_result(system: &SystemConfig, args: &SimulateArgs) -> Result<SimResult> {
    if args.scheme == SchemeKind::SQ2 {
        if let Ok(limit) = stability::finite_n_limit(system, args.servers) {
            if system.arrival_rate() >= limit {
                log::warn!("lambda is at or above the N={} SQ(2) limit {limit:.6}; queues will grow", args.servers);
            }
        }
    }
    let mut config = SimConfig::new(system.clone(), args.servers, sim_scheme(args.scheme, system)?, args.job_size)
        .with_horizon(args.jobs)
        .with_replications(args.replications)
        .with_seed(args.seed);
    if let Some(w) = args.warmup {
        config = config.with_warmup(w);
    }
    let result = replicate::run(&config)?;
    log::info!(
        "{} N={} {}: mean sojourn {:.5} +- {:.5} over {} replications ({} events)",
        args.scheme,
        args.servers,
        job_size_name(args.job_size),
        result.mean_sojourn,
        result.ci_half_width,
        args.replications,
        result.events
    );
    if result.clamped_jobs > 0 {
        log::warn!("{} rounding clamps", result.clamped_jobs);
    }
    Ok(result)
}

/// Per-replication rows and an `all` row, then a blank line and the tails.
pub fn simulate<W: Write>(system: &SystemConfig, args: &SimulateArgs, mut out: W) -> Result<()> {
    let result = simulate_result(system, args)?;
    header(&mut out, "simulate")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["replication", "mean_sojourn", "ci_half_width"])?;
        for r in &result.replications {
            w.write_record([r.replication.to_string(), r.mean_sojourn.to_string(), String::new()])?;
        }
        let ci = if result.ci_half_width.is_nan() { String::new() } else { result.ci_half_width.to_string() };
        w.write_record(["all".to_string(), result.mean_sojourn.to_string(), ci])?;
        w.flush()?;
    }
    writeln!(out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "k", "tail"])?;
    for (j, row) in result.tails.iter().enumerate() {
        let last = row.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        // levels up to the first empty one
        for (k, x) in row.iter().enumerate().take(last + 2) {
            w.write_record([(j + 1).to_string(), k.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rejects server counts that cannot host the configured classes.
pub fn check_servers(system: &SystemConfig, n: usize) -> Result<()> {
    stability::class_sizes(system, n)
        .map(|_| ())
        .map_err(|_| CliError::Config(format!("N={n} does not split into whole classes")))
}
