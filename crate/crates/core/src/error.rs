use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("step size too large: eigenvalue ordering violated at t = {t} (dt = {dt})")]
    StepTooLarge { t: f64, dt: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("instability: psi <= 0 at interior node {node} (t = {t})")]
    Instability { node: usize, t: f64 },

    #[error("positivity violated in homogeneous metric at t = {t}")]
    PositivityViolation { t: f64 },

    #[error("profile not normalized: sup|Rm| = {0} exceeds 1")]
    NotNormalized(f64),

    #[error("window radius {r} out of range (0, {max}]")]
    WindowOutOfRange { r: f64, max: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain(msg: impl Into<String>) -> LabError {
    LabError::Domain(msg.into())
}
