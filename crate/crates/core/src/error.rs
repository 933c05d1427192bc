use thiserror::Error;

/// Errors produced by the identification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("singular evaluation: denominator vanishes at omega = {omega}")]
    SingularEvaluation { omega: f64 },

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid signal record: {0}")]
    InvalidSignal(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("target module G[{j},{i}] is not present in the topology")]
    TargetAbsent { j: usize, i: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("no valid blocking set after {candidates} candidates; best candidate {best:?} fails {failing:?}")]
    NoValidBlockingSet {
        candidates: usize,
        best: Vec<usize>,
        failing: Vec<String>,
    },

    #[error("immersion singular: det(I - G_ZZ) vanishes at omega = {omega}")]
    ImmersionSingular { omega: f64 },

    #[error("noise covariance is not positive semidefinite")]
    NonPsdCovariance,

    #[error("algebraic loop: (I - D0) is singular")]
    AlgebraicLoop,

    #[error("network is unstable (margin {margin:.3e})")]
    Unstable { margin: f64 },

    #[error("model structure error: {0}")]
    Structure(String),

    #[error("parameter vector outside the stability domain: {0}")]
    DomainViolation(String),

    #[error("weighting matrix is not positive definite")]
    NonPdWeight,

    #[error("degenerate residuals: sample covariance is singular")]
    DegenerateResiduals,

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("module G[{j},{i}] is not a free module of the structure")]
    ModuleNotInStructure { j: usize, i: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
