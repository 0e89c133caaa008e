use core::fmt;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The class list was empty.
    EmptyClassList,
    /// A server class had a non-positive (or non-finite) capacity.
    NonPositiveCapacity { class: usize, capacity: f64 },
    /// A server class had a non-positive (or non-finite) population fraction.
    NonPositiveFraction { class: usize, fraction: f64 },
    /// Fractions sum to something other than one.
    FractionsDontSumToOne { sum: f64 },
    /// Arrival rate is negative or not finite.
    InvalidArrivalRate(f64),
    /// Inverse mean job size is non-positive or not finite.
    InvalidServiceRate(f64),
    /// Subset enumeration refused: too many classes.
    TooManyClasses { classes: usize, max: usize },
    /// `N * fraction` is not an integer for some class.
    NonIntegerClassSizes { n: usize, class: usize },
    /// Fewer servers than the operation needs.
    NTooSmall { n: usize, min: usize },
    /// Count-vector enumeration would exceed the combination budget.
    TooManyCombinations { combinations: u128, max: u128 },
    /// The arrival rate is at or above the static capacity limit.
    Unstable { lambda: f64, limit: f64 },
    /// The arrival rate is outside the asymptotic SQ(2) stability region.
    UnstableRegime { lambda: f64, limit: f64 },
    /// The two-class shooting bracket is empty.
    ShootingBracketEmpty { lo: f64, hi: f64 },
    /// Integration stopped without reaching equilibrium.
    NoConvergence { time: f64, drift: f64, boundary_mass: f64 },
    /// An argument lies outside the domain of a map.
    DomainError { value: f64 },
    /// An inverse map cannot reach the requested value.
    Unreachable { target: f64, sup: f64 },
    /// An invalid argument to a non-configuration routine (level, index, ...).
    InvalidArgument(&'static str),
    /// A simulation configuration violates its invariants.
    SimConfig(&'static str),
    /// No post-warmup samples were collected.
    NoSamples,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyClassList => write!(f, "no server classes given"),
            Error::NonPositiveCapacity { class, capacity } => {
                write!(f, "class {class}: capacity must be positive, got {capacity}")
            }
            Error::NonPositiveFraction { class, fraction } => {
                write!(f, "class {class}: fraction must be positive, got {fraction}")
            }
            Error::FractionsDontSumToOne { sum } => {
                write!(f, "class fractions sum to {sum}, expected 1")
            }
            Error::InvalidArrivalRate(l) => write!(f, "invalid arrival rate {l}"),
            Error::InvalidServiceRate(m) => write!(f, "invalid inverse mean job size {m}"),
            Error::TooManyClasses { classes, max } => {
                write!(f, "{classes} classes exceeds the enumeration limit of {max}")
            }
            Error::NonIntegerClassSizes { n, class } => {
                write!(f, "N = {n} does not give an integral number of class-{class} servers")
            }
            Error::NTooSmall { n, min } => write!(f, "N = {n} is too small (need at least {min})"),
            Error::TooManyCombinations { combinations, max } => {
                write!(f, "{combinations} count vectors exceeds the limit of {max}")
            }
            Error::Unstable { lambda, limit } => {
                write!(f, "arrival rate {lambda} is not below the capacity limit {limit}")
            }
            Error::UnstableRegime { lambda, limit } => write!(
                f,
                "arrival rate {lambda} is outside the asymptotic SQ(2) region (sup {limit})"
            ),
            Error::ShootingBracketEmpty { lo, hi } => {
                write!(f, "shooting bracket ({lo}, {hi}) is empty")
            }
            Error::NoConvergence { time, drift, boundary_mass } => write!(
                f,
                "no equilibrium by t = {time}: drift {drift:e}, mass at truncation {boundary_mass:e}"
            ),
            Error::DomainError { value } => write!(f, "argument {value} outside the domain"),
            Error::Unreachable { target, sup } => {
                write!(f, "target {target} is not below the reachable supremum {sup}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SimConfig(msg) => write!(f, "invalid simulation config: {msg}"),
            Error::NoSamples => write!(f, "no post-warmup samples were collected"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
