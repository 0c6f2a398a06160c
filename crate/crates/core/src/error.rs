use thiserror::Error;

/// Errors surfaced by the toolchain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unbound proposition `{0}`")]
    UnboundProposition(String),

    #[error("formula outside the synthesizable fragment: {0}")]
    Fragment(String),

    #[error("stability check failed: {0}")]
    Stability(String),

    #[error("parameter certification failed: {0}")]
    Certification(String),

    #[error("input signal horizons differ: {0} vs {1}")]
    HorizonMismatch(f64, f64),

    #[error("trajectory crosses proposition boundaries too often ({count} tips in one period); word extraction aborted")]
    ZenoLike { count: usize },

    #[error("label realization residual {residual} exceeds mu/2 = {bound}; label set inconsistent")]
    RealizerResidual { residual: f64, bound: f64 },

    #[error("online matcher fault at step {step}: {msg}")]
    MatcherFault { step: usize, msg: String },

    #[error("outcome enumeration exceeded cap of {0} nodes")]
    EnumerationCap(usize),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
