use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("g2(0) undefined: mean photon number {mean:e} is below the floor")]
    UndefinedCorrelation { mean: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("no blockade parameters for a linear cavity (U = 0)")]
    LinearCavity,

    #[error("truncation overflow at t = {time:e} s: top-level population {population:e}")]
    TruncationOverflow { time: f64, population: f64 },

    #[error("integrator failure at t = {time:e} s: {reason}")]
    IntegratorFailure { time: f64, reason: String },

    #[error("drive magnitude has {} roots on a non-monotone branch: {roots:?}", roots.len())]
    MultipleRoots { roots: Vec<f64> },

    #[error("objective is not finite when perturbing component {component}")]
    NonFiniteObjective { component: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown checkpoint `{0}`")]
    UnknownCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for CLI use: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::UnknownCheckpoint(_) | Error::InvalidParameter(_) => 2,
            Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
