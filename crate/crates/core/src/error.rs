use thiserror::Error;

/// Errors raised by the measure, solver and certification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("measure is not normalized: total mass {mass}")]
    Normalization { mass: f64 },

    #[error("problem too large: {atoms} atoms exceeds cap {cap}")]
    Size { atoms: usize, cap: usize },

    #[error("mass mismatch between measures: {0:e}")]
    MassMismatch(f64),

    #[error("kernel evaluation failed: {0}")]
    KernelEval(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("picard iteration did not contract after {iterations} iterations (last ratios {ratios:?})")]
    NonContraction { iterations: usize, ratios: Vec<f64> },

    #[error("iterate left the first-moment ball: moment {moment} > radius {radius}")]
    BallEscape { moment: f64, radius: f64 },

    #[error("probe rejected: {0}")]
    Probe(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("invalid input data: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
