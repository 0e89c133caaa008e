use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hetjsq::commands::{self, Bias, MethodChoice, SimulateArgs};
use hetjsq::config::load_system;
use hetjsq::error::EXIT_OK;
use hetjsq::experiments::{self, ExperimentName, ExperimentSpec, SchemeKind};
use hetjsq::{CliError, Result};
use hetjsq_core::model::DEFAULT_TRUNCATION;
use hetjsq_core::sim::{DEFAULT_HORIZON, DEFAULT_REPLICATIONS};
use hetjsq_core::SystemConfig;

/// Stability regions, mean-field equilibria, optimal routing and
/// simulation of randomized JSQ in heterogeneous PS server farms.
#[derive(Debug, Parser)]
#[command(name = "hetjsq", version)]
struct Cli {
    /// TOML system file (lambda, mu, classes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for simulations.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Shooting,
    Ode,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BiasArg {
    Optimal,
    Proportional,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sq2,
    Static,
    Hybrid,
    Sqd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Exp,
    Const,
    Powerlaw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Fig1,
    Fig2,
    Fig3,
    Table1,
    Custom,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Static, asymptotic SQ(2) and finite-N SQ(2) stability limits.
    Stability {
        /// Also compute the limit for this many servers.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Delay-optimal state-independent routing.
    StaticOpt,
    /// Certified SQ(2) mean-field equilibrium.
    Meanfield {
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Last retained occupancy level.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        levels: usize,
    },
    /// Delay-optimal class bias for hybrid SQ(2).
    HybridOpt {
        #[arg(long, value_enum, default_value_t = BiasArg::Optimal)]
        bias: BiasArg,
    },
    /// Event-driven simulation with replications.
    Simulate {
        #[arg(long, value_enum, default_value_t = SchemeArg::Sq2)]
        scheme: SchemeArg,
        /// Number of sampled servers for `--scheme sqd`.
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Jobs per replication, warmup included.
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        jobs: u64,
        /// Jobs excluded at the start (default: 20% of --jobs).
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
        reps: u32,
        #[arg(long, value_enum, default_value_t = DistArg::Exp)]
        dist: DistArg,
    },
    /// Regenerate an experiment as CSV.
    Reproduce {
        #[arg(value_enum)]
        experiment: ExperimentArg,
        /// Comma-separated arrival rates replacing the recipe's sweep.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated schemes (static, sq2, sqD, hybrid).
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Comma-separated server counts.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Comma-separated job-size laws (exp, const, powerlaw).
        #[arg(long, value_delimiter = ',')]
        dists: Option<Vec<String>>,
        #[arg(long)]
        jobs: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
        /// Skip simulations and emit analytic rows only.
        #[arg(long)]
        no_sim: bool,
        /// Evaluate and simulate points outside the stability regions.
        #[arg(long)]
        allow_unstable: bool,
    },
}

fn system(cli: &Cli) -> Result<SystemConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this subcommand needs --config <file>".into()))?;
    load_system(path)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Stability { n } => commands::stability(&system(cli)?, *n, output(cli)?),
        Command::StaticOpt => commands::static_opt(&system(cli)?, output(cli)?),
        Command::Meanfield { method, levels } => {
            let method = match method {
                MethodArg::Auto => MethodChoice::Auto,
                MethodArg::Shooting => MethodChoice::Shooting,
                MethodArg::Ode => MethodChoice::Ode,
            };
            commands::meanfield(&system(cli)?, method, *levels, output(cli)?)
        }
        Command::HybridOpt { bias } => {
            let bias = match bias {
                BiasArg::Optimal => Bias::Optimal,
                BiasArg::Proportional => Bias::Proportional,
            };
            commands::hybrid_opt(&system(cli)?, bias, output(cli)?)
        }
        Command::Simulate { scheme, d, n, jobs, warmup, reps, dist } => {
            let system = system(cli)?;
            commands::check_servers(&system, *n)?;
            let args = SimulateArgs {
                scheme: match scheme {
                    SchemeArg::Sq2 => SchemeKind::SQ2,
                    SchemeArg::Static => SchemeKind::Static,
                    SchemeArg::Hybrid => SchemeKind::Hybrid,
                    SchemeArg::Sqd => SchemeKind::SqD(*d),
                },
                servers: *n,
                jobs: *jobs,
                warmup: *warmup,
                replications: *reps,
                seed: cli.seed,
                job_size: experiments::parse_job_size(match dist {
                    DistArg::Exp => "exp",
                    DistArg::Const => "const",
                    DistArg::Powerlaw => "powerlaw",
                })?,
            };
            commands::simulate(&system, &args, output(cli)?)
        }
        Command::Reproduce { experiment, lambdas, schemes, n, dists, jobs, reps, no_sim, allow_unstable } => {
            let name = match experiment {
                ExperimentArg::Fig1 => ExperimentName::Fig1,
                ExperimentArg::Fig2 => ExperimentName::Fig2,
                ExperimentArg::Fig3 => ExperimentName::Fig3,
                ExperimentArg::Table1 => ExperimentName::Table1,
                ExperimentArg::Custom => ExperimentName::Custom,
            };
            let custom = match name {
                ExperimentName::Custom => Some(system(cli)?),
                _ => None,
            };
            let mut spec = ExperimentSpec::recipe(name, custom)?;
            spec.seed = cli.seed;
            spec.allow_unstable = *allow_unstable;
            spec.simulation = !no_sim;
            if let Some(l) = lambdas {
                spec.sweep = l.clone();
            }
            if let Some(s) = schemes {
                spec.schemes = s.iter().map(|x| x.parse()).collect::<Result<_>>()?;
            }
            if let Some(n) = n {
                spec.server_counts = n.clone();
            }
            if let Some(d) = dists {
                spec.job_sizes = d.iter().map(|x| experiments::parse_job_size(x)).collect::<Result<_>>()?;
            }
            if let Some(j) = jobs {
                spec.jobs = *j;
            }
            if let Some(r) = reps {
                spec.replications = *r;
            }
            for &n in &spec.server_counts {
                commands::check_servers(&spec.system, n)?;
            }
            let rows = experiments::reproduce(&spec)?;
            experiments::write_rows(name, &rows, output(cli)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if cli.quiet {
        log::set_max_level(log::LevelFilter::Error);
    }
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
