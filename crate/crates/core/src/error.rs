use thiserror::Error;

/// Errors produced by model construction, certificate evaluation, assembly
/// and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("hypothesis `{check}` violated: lhs = {lhs:.6e}, rhs = {rhs:.6e}, slack = {slack:.6e}")]
    HypothesisViolated {
        check: String,
        lhs: f64,
        rhs: f64,
        slack: f64,
    },

    #[error("fields live on different grids ({expected} vs {found})")]
    GridMismatch { expected: String, found: String },

    #[error("degenerate box: edge ratio {ratio:.3e} exceeds 1e6")]
    DegenerateBox { ratio: f64 },

    #[error("linear solver `{method}` did not converge: residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})")]
    SolverDidNotConverge {
        method: &'static str,
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("singular system: {detail}")]
    SingularSystem { detail: String },

    #[error("mean drift {drift:.3e} of `{field}` before projection exceeds 1e-8 (assembly defect)")]
    MeanDrift { field: &'static str, drift: f64 },

    #[error("Picard iteration diverged after {iterations} iterations (norm grew from {initial:.3e} to {current:.3e})")]
    Diverged {
        iterations: usize,
        initial: f64,
        current: f64,
    },

    #[error("extended-precision cross-check failed for `{quantity}`: f64 = {working:.17e}, dd = {extended:.17e}, rel. diff = {rel:.3e}")]
    PrecisionDefect {
        quantity: String,
        working: f64,
        extended: f64,
        rel: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
