use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("ODE step control failed at t = {t}: {reason}")]
    StepControl { t: f64, reason: String },

    #[error("audit failed: clause `{clause}` violated at {location}")]
    AuditFailed { clause: String, location: String },

    #[error("second derivative of F^2 requested at v = 0 for a non-quadratic integrand")]
    HessianAtOrigin,

    #[error("second-order operation requires mollification delta > 0")]
    HessianRequiresDelta,

    #[error("line search failed after {backtracks} backtracks")]
    LineSearch { backtracks: usize },

    #[error("{what} did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Krylov breakdown: {0}")]
    Breakdown(String),

    #[error("radius {r} exceeds half the smallest period {limit}")]
    RadiusTooLarge { r: f64, limit: f64 },

    #[error("level set is empty")]
    EmptyLevelSet,

    #[error("transition band {band} exceeds the reach {reach} of the boundary")]
    BandExceedsReach { band: f64, reach: f64 },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("config errors: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
