//! Recipes regenerating the mean-sojourn curves and the insensitivity table.
//!
//! Every recipe is a sweep over arrival rates; each point yields analytic
//! rows (source `meanfield`) and simulated rows (source `simulation`).
//! SQ(2) points outside the relevant stability region become `diverged`
//! rows unless unstable points are explicitly allowed.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use hetjsq_core::meanfield::{fixed_point, mean_sojourn_from_tails};
use hetjsq_core::sim::{JobSize, Scheme, SimConfig, DEFAULT_HORIZON, DEFAULT_REPLICATIONS};
use hetjsq_core::stability::{finite_n_limit, static_limit};
use hetjsq_core::{hybrid, static_routing, Error as CoreError, SystemConfig};

use crate::config::presets;
use crate::error::{CliError, Result};
use crate::replicate;

/// Version of the `reproduce` CSV layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    Fig1,
    Fig2,
    Fig3,
    Table1,
    Custom,
}

impl FromStr for ExperimentName {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1" => Self::Fig1,
            "fig2" => Self::Fig2,
            "fig3" => Self::Fig3,
            "table1" => Self::Table1,
            "custom" => Self::Custom,
            _ => return Err(CliError::Config(format!("unknown experiment {s:?}"))),
        })
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Table1 => "table1",
            Self::Custom => "custom",
        })
    }
}

/// Routing scheme as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Static,
    SqD(usize),
    Hybrid,
}

impl SchemeKind {
    pub const SQ2: SchemeKind = SchemeKind::SqD(2);
}

impl FromStr for SchemeKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "hybrid" => Ok(Self::Hybrid),
            "sq2" => Ok(Self::SQ2),
            _ => s
                .strip_prefix("sqd")
                .or_else(|| s.strip_prefix("sq"))
                .and_then(|d| d.parse().ok())
                .filter(|&d| d >= 1)
                .map(Self::SqD)
                .ok_or_else(|| CliError::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Static => f.write_str("static"),
            Self::SqD(d) => write!(f, "sq{d}"),
            Self::Hybrid => f.write_str("hybrid"),
        }
    }
}

pub fn parse_job_size(s: &str) -> Result<JobSize> {
    match s {
        "exp" | "exponential" => Ok(JobSize::Exponential),
        "const" | "constant" | "deterministic" => Ok(JobSize::Deterministic),
        "powerlaw" | "power-law" => Ok(JobSize::PowerLaw),
        _ => Err(CliError::Config(format!("unknown job-size law {s:?}"))),
    }
}

pub fn job_size_name(size: JobSize) -> &'static str {
    match size {
        JobSize::Exponential => "exp",
        JobSize::Deterministic => "const",
        JobSize::PowerLaw => "powerlaw",
        JobSize::Fixed(_) => "fixed",
    }
}

/// One reproducible experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// System whose arrival rate is replaced by each sweep value.
    pub system: SystemConfig,
    pub sweep: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    /// Server counts to simulate.
    pub server_counts: Vec<usize>,
    pub job_sizes: Vec<JobSize>,
    pub jobs: u64,
    pub replications: u32,
    pub seed: u64,
    /// Emit analytic rows.
    pub analysis: bool,
    /// Emit simulated rows.
    pub simulation: bool,
    /// Simulate and evaluate points outside the stability regions.
    pub allow_unstable: bool,
}

impl ExperimentSpec {
    /// The built-in recipe `name`; `Custom` needs a system.
    pub fn recipe(name: ExperimentName, custom: Option<SystemConfig>) -> Result<Self> {
        let coarse: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).chain([0.95]).collect();
        let base = |system: SystemConfig, sweep: Vec<f64>, schemes: Vec<SchemeKind>| Self {
            name,
            system,
            sweep,
            schemes,
            server_counts: vec![200],
            job_sizes: vec![JobSize::Exponential],
            jobs: DEFAULT_HORIZON,
            replications: DEFAULT_REPLICATIONS,
            seed: 1,
            analysis: true,
            simulation: true,
            allow_unstable: false,
        };
        let all = vec![SchemeKind::Static, SchemeKind::SQ2, SchemeKind::Hybrid];
        Ok(match name {
            ExperimentName::Fig1 => base(presets::balanced(0.0), coarse, all),
            ExperimentName::Fig2 => {
                let schemes = vec![SchemeKind::Static, SchemeKind::SQ2, SchemeKind::SqD(5), SchemeKind::Hybrid];
                base(presets::skewed(0.0), coarse, schemes)
            }
            ExperimentName::Fig3 => Self {
                server_counts: vec![10, 50, 100, 200],
                ..base(presets::balanced(0.0), coarse[..9].to_vec(), vec![SchemeKind::SQ2])
            },
            ExperimentName::Table1 => Self {
                job_sizes: vec![JobSize::Exponential, JobSize::Deterministic, JobSize::PowerLaw],
                ..base(presets::balanced(0.0), vec![0.2, 0.3, 0.5, 0.7, 0.8, 0.9], vec![SchemeKind::SQ2])
            },
            ExperimentName::Custom => {
                let system = custom
                    .ok_or_else(|| CliError::Config("the custom experiment needs --config".into()))?;
                base(system, coarse, all)
            }
        })
    }
}

/// Value of a result row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Finite(f64),
    /// The point lies outside the scheme's stability region.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub lambda: f64,
    pub scheme: SchemeKind,
    /// `meanfield` or `simulation`.
    pub source: &'static str,
    pub servers: Option<usize>,
    pub job_size: Option<JobSize>,
    pub value: Value,
    pub ci: Option<f64>,
}

impl Row {
    pub fn mean(&self) -> Option<f64> {
        match self.value {
            Value::Finite(x) => Some(x),
            Value::Diverged => None,
        }
    }
}

/// Routing probabilities a scheme uses at `system`'s load.
pub fn sim_scheme(kind: SchemeKind, system: &SystemConfig) -> Result<Scheme> {
    Ok(match kind {
        SchemeKind::SqD(d) => Scheme::SqD { d },
        SchemeKind::Static => {
            Scheme::Static { probabilities: static_routing::solve_static(system)?.probabilities }
        }
        SchemeKind::Hybrid => Scheme::Hybrid { probabilities: hybrid::solve_hybrid(system)?.probabilities },
    })
}

/// Analytic mean sojourn; `None` for schemes without one.
pub fn analytic_sojourn(kind: SchemeKind, system: &SystemConfig) -> Result<Option<f64>> {
    Ok(match kind {
        SchemeKind::Static => Some(static_routing::solve_static(system)?.mean_sojourn),
        SchemeKind::Hybrid => Some(hybrid::solve_hybrid(system)?.mean_sojourn),
        SchemeKind::SqD(2) => {
            let eq = fixed_point(system)?;
            Some(mean_sojourn_from_tails(&eq.tails, system)?)
        }
        SchemeKind::SqD(_) => None,
    })
}

fn is_instability(err: &CliError) -> bool {
    matches!(err, CliError::Core(CoreError::Unstable { .. } | CoreError::UnstableRegime { .. }))
}

/// True when SQ(2) with `n` servers cannot keep up with `system`'s load.
fn sq2_diverges(system: &SystemConfig, n: usize) -> bool {
    match finite_n_limit(system, n) {
        Ok(limit) => system.arrival_rate() >= limit,
        Err(_) => false,
    }
}

/// Runs every point of `spec`.
pub fn reproduce(spec: &ExperimentSpec) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let cap = static_limit(&spec.system);
    for &lambda in &spec.sweep {
        if !(lambda >= 0.0 && (lambda < cap || spec.allow_unstable)) {
            return Err(CliError::Config(format!(
                "arrival rate {lambda} outside [0, {cap}); pass --allow-unstable to force it"
            )));
        }
        let system = spec.system.with_arrival_rate(lambda)?;
        for &kind in &spec.schemes {
            if spec.analysis {
                let value = match analytic_sojourn(kind, &system) {
                    Ok(Some(t)) => Some(Value::Finite(t)),
                    Ok(None) => None,
                    Err(e) if is_instability(&e) => Some(Value::Diverged),
                    Err(e) => return Err(e),
                };
                if let Some(value) = value {
                    rows.push(Row {
                        lambda,
                        scheme: kind,
                        source: "meanfield",
                        servers: None,
                        job_size: None,
                        value,
                        ci: None,
                    });
                }
            }
            if !spec.simulation {
                continue;
            }
            for &n in &spec.server_counts {
                for &job_size in &spec.job_sizes {
                    let diverged = !spec.allow_unstable
                        && (lambda >= cap || (kind == SchemeKind::SQ2 && sq2_diverges(&system, n)));
                    let (value, ci) = if diverged {
                        (Value::Diverged, None)
                    } else {
                        let config = SimConfig::new(system.clone(), n, sim_scheme(kind, &system)?, job_size)
                            .with_horizon(spec.jobs)
                            .with_replications(spec.replications)
                            .with_seed(spec.seed);
                        let result = replicate::run(&config)?;
                        log::info!(
                            "{} lambda={lambda} {kind} N={n} {}: {:.5} +- {:.5}",
                            spec.name,
                            job_size_name(job_size),
                            result.mean_sojourn,
                            result.ci_half_width
                        );
                        (Value::Finite(result.mean_sojourn), Some(result.ci_half_width))
                    };
                    rows.push(Row {
                        lambda,
                        scheme: kind,
                        source: "simulation",
                        servers: Some(n),
                        job_size: Some(job_size),
                        value,
                        ci,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Writes rows as CSV under a versioned header comment.
pub fn write_rows<W: Write>(name: ExperimentName, rows: &[Row], mut out: W) -> Result<()> {
    writeln!(out, "# hetjsq reproduce {name} schema={SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "scheme", "source", "n", "dist", "value", "ci"])?;
    for r in rows {
        let value = match r.value {
            Value::Finite(x) => x.to_string(),
            Value::Diverged => "diverged".to_string(),
        };
        w.write_record([
            r.lambda.to_string(),
            r.scheme.to_string(),
            r.source.to_string(),
            r.servers.map(|n| n.to_string()).unwrap_or_default(),
            r.job_size.map(|d| job_size_name(d).to_string()).unwrap_or_default(),
            value,
            r.ci.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
