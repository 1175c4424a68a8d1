use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("Fock basis of dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: u128, cap: usize },

    #[error("negative dispersion entry {value} at mode {mode}")]
    NegativeDispersion { mode: usize, value: f64 },

    #[error("coherent state needs ||z||^2/eps = {mean_number:.3} <= {limit:.3}; raise the quanta cap")]
    TruncationTooSmall { mean_number: f64, limit: f64 },

    #[error("particle grid mismatch: {0}")]
    GridMismatch(String),

    #[error("form factors do not share one mode set: {0}")]
    InconsistentModes(String),

    #[error("flow is not norm preserving: |z| = {before}, |flow(z)| = {after}")]
    NonUnitaryFlow { before: f64, after: f64 },

    #[error("no sample satisfies the conditioning constraint")]
    EmptyConditioning,

    #[error("Krylov propagation failed: step fell below {dt_min:e} (error estimate {estimate:e})")]
    KrylovBreakdown { dt_min: f64, estimate: f64 },

    #[error("step rejected at t = {t}: local error estimate {estimate:e} exceeds budget {budget:e}")]
    StepRejected { t: f64, estimate: f64, budget: f64 },

    #[error("operator is not hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("insufficient trajectory sampling: {0}")]
    InsufficientSampling(String),

    #[error("superposition components {i} and {j} overlap too strongly ({overlap:e} > {threshold:e})")]
    PointsTooClose {
        i: usize,
        j: usize,
        overlap: f64,
        threshold: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("I/O error")]
    Io(#[from] std::io::Error),

    #[error("serialization error")]
    Json(#[from] serde_json::Error),

    #[error("plotting error: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
