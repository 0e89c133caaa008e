use hetjsq_core::Error as CoreError;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for I/O and other runtime failures.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit status for invalid configuration or arguments.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status when the requested load is outside a stability region.
pub const EXIT_UNSTABLE: i32 = 3;
/// Exit status when a numerical procedure did not converge.
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) | CliError::Csv(_) => EXIT_RUNTIME,
            CliError::Core(e) => match e {
                CoreError::Unstable { .. }
                | CoreError::UnstableRegime { .. }
                | CoreError::ShootingBracketEmpty { .. } => EXIT_UNSTABLE,
                CoreError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
                _ => EXIT_CONFIG,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
